//! Unit-suffixed scalars in configuration files, e.g. `"20 dBm"`, `"50 m"`.
//!
//! Each quantity keeps the text it was written as, so re-serializing a
//! config reproduces the user's input exactly.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn split(text: &str) -> Option<(f64, &str)> {
    let t = text.trim();
    let idx = t
        .char_indices()
        .find(|&(i, c)| {
            c.is_alphabetic() && !(matches!(c, 'e' | 'E') && t[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+'))
                || c == 'λ'
        })
        .map(|(i, _)| i)?;
    let value: f64 = t[..idx].trim().parse().ok()?;
    value.is_finite().then_some((value, t[idx..].trim()))
}

macro_rules! quantity {
    ($name:ident, $what:literal, $units:literal, $convert:expr) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            value: f64,
            text: String,
        }

        impl $name {
            pub fn parse(text: &str) -> Result<Self, String> {
                let (number, unit) = split(text).ok_or_else(|| {
                    format!(concat!("expected a ", $what, " with a unit ({}), got {:?}"), $units, text)
                })?;
                let convert: fn(f64, &str) -> Option<f64> = $convert;
                let value = convert(number, unit).ok_or_else(|| {
                    format!(concat!("unknown ", $what, " unit {:?} (expected {})"), unit, $units)
                })?;
                Ok(Self {
                    value,
                    text: text.trim().to_string(),
                })
            }

            pub fn text(&self) -> &str {
                &self.text
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.text)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.text)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = $name;

                    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                        write!(f, concat!("a ", $what, " string with a unit ({})"), $units)
                    }

                    fn visit_str<E: de::Error>(self, v: &str) -> Result<$name, E> {
                        $name::parse(v).map_err(E::custom)
                    }

                    fn visit_f64<E: de::Error>(self, v: f64) -> Result<$name, E> {
                        Err(E::custom(format!(concat!("missing unit on ", $what, " {} (expected {})"), v, $units)))
                    }

                    fn visit_i64<E: de::Error>(self, v: i64) -> Result<$name, E> {
                        self.visit_f64(v as f64)
                    }

                    fn visit_u64<E: de::Error>(self, v: u64) -> Result<$name, E> {
                        self.visit_f64(v as f64)
                    }
                }
                d.deserialize_any(V)
            }
        }
    };
}

quantity!(Power, "power", "dBm, dBW, W, mW, uW", |x, u| match u {
    "dBm" => Some(10f64.powf((x - 30.0) / 10.0)),
    "dBW" => Some(10f64.powf(x / 10.0)),
    "W" => Some(x),
    "mW" => Some(x * 1e-3),
    "uW" | "µW" => Some(x * 1e-6),
    _ => None,
});

quantity!(Decibel, "level", "dB", |x, u| (u == "dB").then_some(x));

quantity!(Frequency, "frequency", "Hz, kHz, MHz, GHz", |x, u| match u {
    "Hz" => Some(x),
    "kHz" => Some(x * 1e3),
    "MHz" => Some(x * 1e6),
    "GHz" => Some(x * 1e9),
    _ => None,
});

quantity!(Length, "length", "m, cm, mm, lambda", |x, u| match u {
    "m" => Some(x),
    "cm" => Some(x * 1e-2),
    "mm" => Some(x * 1e-3),
    "lambda" | "λ" => Some(x),
    _ => None,
});

impl Power {
    pub fn watts(&self) -> f64 {
        self.value
    }

    pub fn dbm(&self) -> f64 {
        10.0 * self.value.log10() + 30.0
    }
}

impl Decibel {
    pub fn db(&self) -> f64 {
        self.value
    }
}

impl Frequency {
    pub fn hz(&self) -> f64 {
        self.value
    }
}

impl Length {
    /// Length in meters, given the carrier wavelength.
    pub fn meters(&self, wavelength: f64) -> f64 {
        if self.in_wavelengths() {
            self.value * wavelength
        } else {
            self.value
        }
    }

    /// Length in wavelengths.
    pub fn wavelengths(&self, wavelength: f64) -> f64 {
        self.meters(wavelength) / wavelength
    }

    fn in_wavelengths(&self) -> bool {
        let unit = self.text.trim_start_matches(|c: char| !c.is_alphabetic() && c != 'λ');
        unit.starts_with("lambda") || unit.starts_with('λ')
    }
}
