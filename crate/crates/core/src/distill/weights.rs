use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{entropy, softmax_temperature, Distribution};
use crate::scalar::Real;

/// Direction of the entropy weighting. `Positive` follows the weight formula
/// as written (higher entropy, higher weight); `Negative` favours confident
/// teachers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum ImpuritySign {
    #[default]
    Positive,
    Negative,
}

impl ImpuritySign {
    pub fn as_f64(self) -> f64 {
        match self {
            ImpuritySign::Positive => 1.0,
            ImpuritySign::Negative => -1.0,
        }
    }
}

impl From<ImpuritySign> for i8 {
    fn from(s: ImpuritySign) -> i8 {
        s.as_f64() as i8
    }
}

impl TryFrom<i8> for ImpuritySign {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, String> {
        match v {
            1 => Ok(ImpuritySign::Positive),
            -1 => Ok(ImpuritySign::Negative),
            other => Err(format!("impurity sign must be +1 or -1, got {other}")),
        }
    }
}

impl FromStr for ImpuritySign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "+1" => Ok(ImpuritySign::Positive),
            "-1" => Ok(ImpuritySign::Negative),
            other => Err(Error::InvalidConfig(format!("impurity sign must be +1 or -1, got {other}"))),
        }
    }
}

/// How teacher weights are chosen during distillation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectiveStrategy {
    /// Uniform `1/K` for every teacher and instance.
    Fixed,
    /// Per-instance entropy-softmax weights, separately for start and end.
    Impurity { sign: ImpuritySign },
}

impl fmt::Display for SelectiveStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectiveStrategy::Fixed => write!(f, "fixed"),
            SelectiveStrategy::Impurity { sign } => write!(f, "impurity({:+})", sign.as_f64() as i8),
        }
    }
}

/// Per-teacher weights for start and end logits.
#[derive(Clone, Debug, PartialEq)]
pub struct TeacherWeights<T> {
    pub start: Vec<T>,
    pub end: Vec<T>,
}

impl<T: Real> TeacherWeights<T> {
    pub fn new(start: Vec<T>, end: Vec<T>) -> Result<Self> {
        if start.len() != end.len() {
            return Err(Error::shape("start and end weight counts differ"));
        }
        Distribution::new(start.clone())?;
        Distribution::new(end.clone())?;
        Ok(TeacherWeights { start, end })
    }

    pub fn teachers(&self) -> usize {
        self.start.len()
    }
}

/// `w_s^k = w_e^k = 1/K`.
pub fn fixed_weights<T: Real>(k: usize) -> Result<TeacherWeights<T>> {
    if k == 0 {
        return Err(Error::InvalidConfig("at least one teacher is required".into()));
    }
    let w = vec![T::one() / T::from_count(k); k];
    Ok(TeacherWeights { start: w.clone(), end: w })
}

/// `w^k = exp(sign · I(softmax(z^k))) / Σ_j exp(sign · I(softmax(z^j)))`.
pub fn impurity_weights<T: Real>(per_teacher_logits: &[&[T]], sign: ImpuritySign) -> Result<Vec<T>> {
    let Some(first) = per_teacher_logits.first() else {
        return Err(Error::InvalidConfig("at least one teacher is required".into()));
    };
    if per_teacher_logits.iter().any(|z| z.len() != first.len()) {
        return Err(Error::shape("teacher logits differ in length"));
    }
    let s = T::lit(sign.as_f64());
    let scores = per_teacher_logits
        .iter()
        .map(|z| Ok(s * entropy(&softmax_temperature(z, T::one())?)))
        .collect::<Result<Vec<T>>>()?;
    Ok(softmax_temperature(&scores, T::one())?.into_vec())
}

/// Impurity weights computed independently for the start and end heads.
pub fn impurity_teacher_weights<T: Real>(
    start_logits: &[&[T]],
    end_logits: &[&[T]],
    sign: ImpuritySign,
) -> Result<TeacherWeights<T>> {
    Ok(TeacherWeights {
        start: impurity_weights(start_logits, sign)?,
        end: impurity_weights(end_logits, sign)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_weight_examples() {
        let w = fixed_weights::<f64>(3).unwrap();
        assert!(w.start.iter().chain(&w.end).all(|&v| v == 1.0 / 3.0));
        assert_eq!(fixed_weights::<f64>(1).unwrap().start, vec![1.0]);
        assert_eq!(fixed_weights::<f64>(4).unwrap().end, vec![0.25; 4]);
        assert!(matches!(fixed_weights::<f64>(0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn identical_teachers_get_uniform_weights() {
        let z = [0.3f64, 1.0, -2.0];
        for sign in [ImpuritySign::Positive, ImpuritySign::Negative] {
            let w = impurity_weights(&[&z[..], &z[..], &z[..]], sign).unwrap();
            assert!(w.iter().all(|&v| v == 1.0 / 3.0), "{w:?}");
        }
    }

    #[test]
    fn worked_entropy_example() {
        // uniform over two positions has entropy ln 2; a saturated one-hot has 0
        let uniform = [0.0f64, 0.0];
        let certain = [0.0f64, -1e9];
        let plus = impurity_weights(&[&uniform[..], &certain[..]], ImpuritySign::Positive).unwrap();
        assert!((plus[0] - 2.0 / 3.0).abs() < 1e-9 && (plus[1] - 1.0 / 3.0).abs() < 1e-9);
        let minus = impurity_weights(&[&uniform[..], &certain[..]], ImpuritySign::Negative).unwrap();
        assert!((minus[0] - 1.0 / 3.0).abs() < 1e-9 && (minus[1] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn sign_parsing() {
        assert_eq!("-1".parse::<ImpuritySign>().unwrap(), ImpuritySign::Negative);
        assert_eq!("+1".parse::<ImpuritySign>().unwrap(), ImpuritySign::Positive);
        assert!("0".parse::<ImpuritySign>().is_err());
        let json = serde_json::to_string(&SelectiveStrategy::Impurity { sign: ImpuritySign::Negative }).unwrap();
        assert_eq!(json, r#"{"kind":"impurity","sign":-1}"#);
    }

    #[test]
    fn empty_teacher_list_is_invalid() {
        assert!(matches!(impurity_weights::<f64>(&[], ImpuritySign::Positive), Err(Error::InvalidConfig(_))));
    }
}
