//! Float formatting for CSV/JSON outputs.

use serde::{Deserialize, Deserializer, Serializer};

/// `%.12g`-style formatting: 12 significant digits, trailing zeros trimmed.
pub fn g12(x: f64) -> String {
    sig(x, 12)
}

pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -5 || exp >= digits as i32 {
        let s = format!("{:.*e}", digits - 1, x);
        let (mant, e) = s.split_once('e').expect("exponent");
        let mant = trim(mant);
        let e: i32 = e.parse().expect("exponent digits");
        format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// 17 significant digits, exact round trip.
pub fn full(x: f64) -> String {
    format!("{:.16e}", x)
}

fn parse<'de, D: Deserializer<'de>>(s: &str) -> Result<f64, D::Error> {
    s.parse::<f64>().map_err(serde::de::Error::custom)
}

/// Serde adapters writing floats as 17-digit decimal strings.
pub mod dec17 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&full(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        parse::<D>(&s)
    }
}

pub mod dec17_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(x: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(x.len()))?;
        for v in x {
            seq.serialize_element(&full(*v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| parse::<D>(s)).collect()
    }
}

pub mod dec17_mat {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(x: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(x.len()))?;
        for row in x {
            let r: Vec<String> = row.iter().map(|v| full(*v)).collect();
            seq.serialize_element(&r)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let v = Vec::<Vec<String>>::deserialize(d)?;
        v.iter().map(|r| r.iter().map(|s| parse::<D>(s)).collect()).collect()
    }
}
