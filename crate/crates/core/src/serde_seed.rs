//! TOML integers are signed 64-bit; seeds above `i64::MAX` are written as
//! decimal strings instead.

use serde::{de, Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
    match i64::try_from(*seed) {
        Ok(v) => s.serialize_i64(v),
        Err(_) => s.serialize_str(&seed.to_string()),
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Seed {
        Int(i64),
        Text(String),
    }
    match Seed::deserialize(d)? {
        Seed::Int(v) => {
            u64::try_from(v).map_err(|_| de::Error::custom("seed must be non-negative"))
        }
        Seed::Text(t) => t.trim().parse().map_err(de::Error::custom),
    }
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct S {
        #[serde(with = "super")]
        seed: u64,
    }

    #[test]
    fn large_and_small_seeds_round_trip() {
        for seed in [0, 42, i64::MAX as u64, u64::MAX] {
            let text = toml::to_string(&S { seed }).unwrap();
            assert_eq!(toml::from_str::<S>(&text).unwrap(), S { seed });
        }
        assert!(toml::from_str::<S>("seed = -1").is_err());
    }
}
