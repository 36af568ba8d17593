//! JSON encoding: `{"G": [[..]], "c": [..], "A": [[..]], "b": [..], "h": [..]}`
//! with row-major matrices and the string `"inf"` for an unbounded half-width.
//! Boxes use `{"lo": [..], "hi": [..]}` with `"inf"` / `"-inf"` for infinite bounds.

use nalgebra::DVector;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{ConstrainedZonotope, HalfWidth, IntervalBox};
use crate::linalg::{from_rows, to_rows};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Num(f64),
    Tag(String),
}

impl Scalar {
    fn encode(v: f64) -> Self {
        if v == f64::INFINITY {
            Scalar::Tag("inf".into())
        } else if v == f64::NEG_INFINITY {
            Scalar::Tag("-inf".into())
        } else {
            Scalar::Num(v)
        }
    }

    fn decode(self) -> Result<f64, String> {
        match self {
            Scalar::Num(v) => Ok(v),
            Scalar::Tag(s) if s == "inf" => Ok(f64::INFINITY),
            Scalar::Tag(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Scalar::Tag(s) => Err(format!("unexpected string {s:?}, expected \"inf\" or \"-inf\"")),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CzWire {
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
    c: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    h: Vec<Scalar>,
}

impl Serialize for ConstrainedZonotope {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CzWire {
            g: to_rows(self.generators()),
            c: self.center().iter().copied().collect(),
            a: to_rows(self.constraint_matrix()),
            b: self.constraint_offset().iter().copied().collect(),
            h: self
                .half_widths()
                .iter()
                .map(|hw| match hw {
                    HalfWidth::Finite(v) => Scalar::Num(*v),
                    HalfWidth::Unbounded => Scalar::Tag("inf".into()),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConstrainedZonotope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = CzWire::deserialize(d)?;
        let ng = w.h.len();
        let ragged = |m: &[Vec<f64>]| m.iter().any(|r| r.len() != ng);
        if ragged(&w.g) || ragged(&w.a) {
            return Err(D::Error::custom(format!(
                "every row of G and A must have {ng} entries (one per half-width)"
            )));
        }
        let h = w
            .h
            .into_iter()
            .map(|s| match s {
                Scalar::Tag(t) if t == "inf" => Ok(HalfWidth::Unbounded),
                other => other
                    .decode()
                    .map(HalfWidth::Finite)
                    .map_err(D::Error::custom),
            })
            .collect::<Result<Vec<_>, _>>()?;
        ConstrainedZonotope::new(
            from_rows(&w.g, ng),
            DVector::from_vec(w.c),
            from_rows(&w.a, ng),
            DVector::from_vec(w.b),
            h,
        )
        .map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct BoxWire {
    lo: Vec<Scalar>,
    hi: Vec<Scalar>,
}

impl Serialize for IntervalBox {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        BoxWire {
            lo: self.lo().iter().map(|&v| Scalar::encode(v)).collect(),
            hi: self.hi().iter().map(|&v| Scalar::encode(v)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntervalBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = BoxWire::deserialize(d)?;
        let dec = |v: Vec<Scalar>| {
            v.into_iter()
                .map(Scalar::decode)
                .collect::<Result<Vec<_>, _>>()
                .map_err(D::Error::custom)
        };
        IntervalBox::new(DVector::from_vec(dec(w.lo)?), DVector::from_vec(dec(w.hi)?))
            .map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_unbounded_half_width_as_inf() {
        let z = ConstrainedZonotope::unbounded(1);
        let s = serde_json::to_string(&z).unwrap();
        assert_eq!(s, r#"{"G":[[1.0]],"c":[0.0],"A":[],"b":[],"h":["inf"]}"#);
        let back: ConstrainedZonotope = serde_json::from_str(&s).unwrap();
        assert_eq!(back, z);
    }

    #[test]
    fn parses_constrained_example() {
        let s = r#"{"G":[[1,0],[0,1]],"c":[0,0],"A":[[1,1]],"b":[1],"h":[1,"inf"]}"#;
        let z: ConstrainedZonotope = serde_json::from_str(s).unwrap();
        assert_eq!(z.num_constraints(), 1);
        assert_eq!(z.half_widths()[1], HalfWidth::Unbounded);
    }

    #[test]
    fn rejects_ragged_rows_and_bad_tags() {
        let s = r#"{"G":[[1,0]],"c":[0],"A":[],"b":[],"h":[1]}"#;
        assert!(serde_json::from_str::<ConstrainedZonotope>(s).is_err());
        let s = r#"{"G":[[1]],"c":[0],"A":[],"b":[],"h":["huge"]}"#;
        assert!(serde_json::from_str::<ConstrainedZonotope>(s).is_err());
    }

    #[test]
    fn box_with_infinite_bounds() {
        let b = IntervalBox::from_slices(&[f64::NEG_INFINITY, 0.0], &[f64::INFINITY, 1.5]).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"lo":["-inf",0.0],"hi":["inf",1.5]}"#);
        assert_eq!(serde_json::from_str::<IntervalBox>(&s).unwrap(), b);
    }
}
