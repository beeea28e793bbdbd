//! Weight systems: the per-node scale `sigma` and increment weight `alpha`.
//!
//! Homogeneous (level) weights assign one value per depth through a named
//! sequence family and work on every tree kind, including implicit ones.
//! Per-node weights carry explicit vectors indexed by dense node order and
//! are restricted to explicit trees.
//!
//! Validation contract: `alpha >= 0` everywhere, `sigma > 0` everywhere and
//! non-increasing along every branch. For named families both properties are
//! decided analytically from the parameters, so lazy evaluation at large
//! depths needs no scan; note that a mathematically positive `sigma` such as
//! `q^k` may still underflow to zero in double precision at extreme depths,
//! which distance computations tolerate (the affected terms vanish).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A nonnegative sequence over levels `k = 0, 1, 2, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum LevelSeq {
    /// `k -> c`
    Constant { c: f64 },
    /// `k -> (k+1)^(-gamma)`
    Power { gamma: f64 },
    /// `k -> k^(-gamma)` for `k >= 1`, with an explicit value at `k = 0`.
    PowerK { gamma: f64, at0: f64 },
    /// `k -> q^k`
    Geometric { q: f64 },
    /// `k -> (k+1)^b * q^k`
    #[serde(rename = "power-times-geometric")]
    PowerGeometric { b: f64, q: f64 },
    /// `k -> exp((ln k)^beta / 2)` for `k >= 1`, value 1 at `k = 0`.
    LogExp { beta: f64 },
    /// Explicit table; defined for `k < values.len()`.
    Array { values: Vec<f64> },
    /// Pointwise product of factors (used by weight transfers).
    Product { factors: Vec<LevelSeq> },
}

impl LevelSeq {
    pub fn value(&self, k: u64) -> f64 {
        match self {
            LevelSeq::Constant { c } => *c,
            LevelSeq::Power { gamma } => ((k + 1) as f64).powf(-gamma),
            LevelSeq::PowerK { gamma, at0 } => {
                if k == 0 {
                    *at0
                } else {
                    (k as f64).powf(-gamma)
                }
            }
            LevelSeq::Geometric { q } => q.powi(k.min(i32::MAX as u64) as i32),
            LevelSeq::PowerGeometric { b, q } => {
                ((k + 1) as f64).powf(*b) * q.powi(k.min(i32::MAX as u64) as i32)
            }
            LevelSeq::LogExp { beta } => {
                if k == 0 {
                    1.0
                } else {
                    ((k as f64).ln().powf(*beta) / 2.0).exp()
                }
            }
            LevelSeq::Array { values } => values[k as usize],
            LevelSeq::Product { factors } => factors.iter().map(|f| f.value(k)).product(),
        }
    }

    /// Natural log of the value; `-inf` where the value is zero. Exact in
    /// parameters, so criteria can run at truncations where plain values
    /// overflow or underflow.
    pub fn ln_value(&self, k: u64) -> f64 {
        match self {
            LevelSeq::Constant { c } => c.ln(),
            LevelSeq::Power { gamma } => -gamma * ((k + 1) as f64).ln(),
            LevelSeq::PowerK { gamma, at0 } => {
                if k == 0 {
                    at0.ln()
                } else {
                    -gamma * (k as f64).ln()
                }
            }
            LevelSeq::Geometric { q } => k as f64 * q.ln(),
            LevelSeq::PowerGeometric { b, q } => b * ((k + 1) as f64).ln() + k as f64 * q.ln(),
            LevelSeq::LogExp { beta } => {
                if k == 0 {
                    0.0
                } else {
                    (k as f64).ln().powf(*beta) / 2.0
                }
            }
            LevelSeq::Array { values } => values[k as usize].ln(),
            LevelSeq::Product { factors } => factors.iter().map(|f| f.ln_value(k)).sum(),
        }
    }

    /// Length limit for table-backed sequences (`None` = unbounded).
    pub fn len_limit(&self) -> Option<u64> {
        match self {
            LevelSeq::Array { values } => Some(values.len() as u64),
            LevelSeq::Product { factors } => factors.iter().filter_map(|f| f.len_limit()).min(),
            _ => None,
        }
    }

    /// Validity as an increment weight: nonnegative and finite everywhere.
    fn check_alpha(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidWeights(m));
        match self {
            LevelSeq::Constant { c } if !(c.is_finite() && *c >= 0.0) => {
                bad(format!("constant alpha must be >= 0, got {c}"))
            }
            LevelSeq::Power { gamma } if !gamma.is_finite() => bad("power gamma not finite".into()),
            LevelSeq::PowerK { gamma, at0 } if !gamma.is_finite() || !(*at0 >= 0.0) => {
                bad("power-k needs finite gamma and at0 >= 0".into())
            }
            LevelSeq::Geometric { q } if !(q.is_finite() && *q > 0.0) => {
                bad(format!("geometric ratio must be > 0, got {q}"))
            }
            LevelSeq::PowerGeometric { b, q } if !(b.is_finite() && q.is_finite() && *q > 0.0) => {
                bad("power-times-geometric needs finite b and q > 0".into())
            }
            LevelSeq::LogExp { beta } if !(beta.is_finite() && *beta > 0.0) => {
                bad("log-exp exponent must be > 0".into())
            }
            LevelSeq::Array { values } => {
                if values.is_empty() {
                    return bad("empty weight table".into());
                }
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return bad(format!("alpha table entry {v} is not a finite nonnegative"));
                }
                Ok(())
            }
            LevelSeq::Product { factors } => {
                for f in factors {
                    f.check_alpha()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Validity as a scale: positive and non-increasing in the level. For
    /// named families this is decided from the parameters.
    fn check_sigma(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidWeights(m));
        match self {
            LevelSeq::Constant { c } => {
                if c.is_finite() && *c > 0.0 {
                    Ok(())
                } else {
                    bad(format!("constant sigma must be > 0, got {c}"))
                }
            }
            LevelSeq::Power { gamma } => {
                if gamma.is_finite() && *gamma >= 0.0 {
                    Ok(())
                } else {
                    bad(format!("power sigma needs gamma >= 0, got {gamma}"))
                }
            }
            LevelSeq::PowerK { gamma, at0 } => {
                if gamma.is_finite() && *gamma >= 0.0 && *at0 >= 1.0 && at0.is_finite() {
                    Ok(())
                } else {
                    bad(format!(
                        "power-k sigma needs gamma >= 0 and at0 >= 1 (sigma(1) = 1), got gamma={gamma} at0={at0}"
                    ))
                }
            }
            LevelSeq::Geometric { q } => {
                if q.is_finite() && *q > 0.0 && *q <= 1.0 {
                    Ok(())
                } else {
                    bad(format!("geometric sigma needs 0 < q <= 1, got {q}"))
                }
            }
            LevelSeq::PowerGeometric { b, q } => {
                // Ratio sigma(k+1)/sigma(k) = ((k+2)/(k+1))^b * q peaks at
                // k = 0 for b > 0 and approaches q from below for b <= 0.
                let ok = q.is_finite()
                    && *q > 0.0
                    && b.is_finite()
                    && if *b > 0.0 {
                        2f64.powf(*b) * q <= 1.0
                    } else {
                        *q <= 1.0
                    };
                if ok {
                    Ok(())
                } else {
                    bad(format!(
                        "power-times-geometric sigma must be non-increasing; b={b} q={q} is not"
                    ))
                }
            }
            LevelSeq::LogExp { .. } => {
                bad("log-exp grows with the level and cannot serve as sigma".into())
            }
            LevelSeq::Array { values } => {
                if values.is_empty() {
                    return bad("empty weight table".into());
                }
                for (k, w) in values.windows(2).enumerate() {
                    if !(w[0].is_finite() && w[0] > 0.0) {
                        return bad(format!("sigma table entry {} is not positive", w[0]));
                    }
                    if w[1] > w[0] {
                        return bad(format!(
                            "sigma table increases at level {}: {} -> {}",
                            k + 1,
                            w[0],
                            w[1]
                        ));
                    }
                }
                let last = *values.last().unwrap();
                if !(last.is_finite() && last > 0.0) {
                    return bad(format!("sigma table entry {last} is not positive"));
                }
                Ok(())
            }
            LevelSeq::Product { factors } => {
                // Sufficient condition: every factor is itself a valid scale.
                for f in factors {
                    f.check_sigma()?;
                }
                Ok(())
            }
        }
    }

    /// Whether the sequence is non-decreasing in the level, when this can be
    /// read off the parameters. `None` means undetermined.
    pub fn is_non_decreasing(&self) -> Option<bool> {
        match self {
            LevelSeq::Constant { .. } => Some(true),
            LevelSeq::Power { gamma } => Some(*gamma <= 0.0),
            LevelSeq::PowerK { gamma, at0 } => {
                Some(*gamma <= 0.0 && *at0 <= 1.0)
            }
            LevelSeq::Geometric { q } => Some(*q >= 1.0),
            LevelSeq::PowerGeometric { b, q } => {
                // Ratio ((k+2)/(k+1))^b * q: minimum over k is q (b >= 0)
                // or the k = 0 value 2^b q (b < 0).
                Some(if *b >= 0.0 {
                    *q >= 1.0
                } else {
                    2f64.powf(*b) * q >= 1.0
                })
            }
            LevelSeq::LogExp { .. } => Some(true),
            LevelSeq::Array { values } => Some(values.windows(2).all(|w| w[1] >= w[0])),
            LevelSeq::Product { factors } => {
                let parts: Vec<Option<bool>> =
                    factors.iter().map(|f| f.is_non_decreasing()).collect();
                if parts.iter().all(|p| *p == Some(true)) {
                    Some(true)
                } else {
                    None
                }
            }
        }
    }

    /// Pointwise product, simplified when both operands live in the same
    /// parametric family.
    pub fn product(a: &LevelSeq, b: &LevelSeq) -> LevelSeq {
        use LevelSeq::*;
        match (a, b) {
            (Constant { c }, other) | (other, Constant { c }) if *c == 1.0 => other.clone(),
            (Constant { c: x }, Constant { c: y }) => Constant { c: x * y },
            (Power { gamma: x }, Power { gamma: y }) => Power { gamma: x + y },
            (PowerK { gamma: x, at0: u }, PowerK { gamma: y, at0: v }) => PowerK {
                gamma: x + y,
                at0: u * v,
            },
            (Geometric { q: x }, Geometric { q: y }) => Geometric { q: x * y },
            (PowerGeometric { b: bx, q: qx }, PowerGeometric { b: by, q: qy }) => PowerGeometric {
                b: bx + by,
                q: qx * qy,
            },
            (Power { gamma }, Geometric { q }) | (Geometric { q }, Power { gamma }) => {
                PowerGeometric { b: -gamma, q: *q }
            }
            (PowerGeometric { b, q }, Power { gamma }) | (Power { gamma }, PowerGeometric { b, q }) => {
                PowerGeometric { b: b - gamma, q: *q }
            }
            (PowerGeometric { b, q }, Geometric { q: y }) | (Geometric { q: y }, PowerGeometric { b, q }) => {
                PowerGeometric { b: *b, q: q * y }
            }
            (x, y) => Product {
                factors: vec![x.clone(), y.clone()],
            },
        }
    }
}

/// `ln(sum of exp(x))` over a stream of log-scale terms, in one pass with
/// a running maximum so that widely spread magnitudes neither overflow nor
/// vanish. `-inf` terms (logs of zero) are skipped; an all`-inf` stream
/// returns `-inf`.
pub fn logsumexp_stream<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut m = f64::NEG_INFINITY;
    let mut s = 0.0f64;
    for x in terms {
        if x == f64::NEG_INFINITY {
            continue;
        }
        if x <= m {
            s += (x - m).exp();
        } else {
            s = s * (m - x).exp() + 1.0;
            m = x;
        }
    }
    if m == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        m + s.ln()
    }
}

/// Complete weight assignment for a tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum WeightSystem {
    /// One `(alpha, sigma)` pair per depth; valid on any tree kind.
    Level { alpha: LevelSeq, sigma: LevelSeq },
    /// Explicit per-node tables in dense node order; explicit trees only.
    PerNode { alpha: Vec<f64>, sigma: Vec<f64> },
}

impl WeightSystem {
    /// Homogeneous weights, validated at construction.
    pub fn level(alpha: LevelSeq, sigma: LevelSeq) -> Result<WeightSystem> {
        alpha.check_alpha()?;
        sigma.check_sigma()?;
        Ok(WeightSystem::Level { alpha, sigma })
    }

    /// Per-node weights. Table shape is validated here; the per-branch
    /// monotonicity of `sigma` is validated against the tree when binding.
    pub fn per_node(alpha: Vec<f64>, sigma: Vec<f64>) -> Result<WeightSystem> {
        if alpha.len() != sigma.len() {
            return Err(Error::InvalidWeights(format!(
                "alpha table has {} entries, sigma table {}",
                alpha.len(),
                sigma.len()
            )));
        }
        LevelSeq::Array {
            values: alpha.clone(),
        }
        .check_alpha()?;
        for s in &sigma {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::InvalidWeights(format!(
                    "sigma table entry {s} is not positive"
                )));
            }
        }
        Ok(WeightSystem::PerNode { alpha, sigma })
    }

    pub fn is_level(&self) -> bool {
        matches!(self, WeightSystem::Level { .. })
    }

    /// Parse the weight-specification JSON.
    pub fn from_json_str(s: &str) -> Result<WeightSystem> {
        let ws: WeightSystem = serde_json::from_str(s)?;
        ws.revalidate()?;
        Ok(ws)
    }

    /// Re-run construction validation (for deserialized values).
    pub fn revalidate(&self) -> Result<()> {
        match self {
            WeightSystem::Level { alpha, sigma } => {
                alpha.check_alpha()?;
                sigma.check_sigma()
            }
            WeightSystem::PerNode { alpha, sigma } => {
                Self::per_node(alpha.clone(), sigma.clone()).map(|_| ())
            }
        }
    }

    /// The level sequences, when homogeneous.
    pub fn level_seqs(&self) -> Result<(&LevelSeq, &LevelSeq)> {
        match self {
            WeightSystem::Level { alpha, sigma } => Ok((alpha, sigma)),
            WeightSystem::PerNode { .. } => Err(Error::NotHomogeneous(
                "per-node weights have no level sequences".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_values_match_formulas() {
        let p = LevelSeq::Power { gamma: 1.0 };
        assert_eq!(p.value(0), 1.0);
        assert_eq!(p.value(4), 0.2);
        let pk = LevelSeq::PowerK { gamma: 1.0, at0: 0.0 };
        assert_eq!(pk.value(0), 0.0);
        assert_eq!(pk.value(4), 0.25);
        assert_eq!(pk.ln_value(0), f64::NEG_INFINITY);
        let g = LevelSeq::Geometric { q: 0.5 };
        assert_eq!(g.value(3), 0.125);
        let ptg = LevelSeq::PowerGeometric { b: 2.0, q: 2.0 };
        assert_eq!(ptg.value(1), 4.0 * 2.0);
        let le = LevelSeq::LogExp { beta: 1.5 };
        assert_eq!(le.value(0), 1.0);
        assert_eq!(le.value(1), 1.0);
        let k = 7u64;
        assert!((le.ln_value(k) - (k as f64).ln().powf(1.5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ln_value_agrees_with_value_in_range() {
        let seqs = [
            LevelSeq::Constant { c: 0.7 },
            LevelSeq::Power { gamma: 2.5 },
            LevelSeq::PowerK { gamma: 1.0, at0: 1.0 },
            LevelSeq::Geometric { q: 0.9 },
            LevelSeq::PowerGeometric { b: -0.75, q: 2.0 },
            LevelSeq::LogExp { beta: 1.2 },
        ];
        for s in &seqs {
            for k in 0..200 {
                let v = s.value(k);
                let lv = s.ln_value(k);
                assert!(
                    (v.ln() - lv).abs() < 1e-9 * (1.0 + lv.abs()),
                    "{s:?} at {k}: {} vs {}",
                    v.ln(),
                    lv
                );
            }
        }
    }

    #[test]
    fn sigma_validation_accepts_and_rejects_per_family_rules() {
        // Valid scales.
        for s in [
            LevelSeq::Constant { c: 1.0 },
            LevelSeq::Power { gamma: 0.5 },
            LevelSeq::PowerK { gamma: 1.0, at0: 1.0 },
            LevelSeq::Geometric { q: 0.5 },
            LevelSeq::PowerGeometric { b: 0.35, q: 0.5 },
            LevelSeq::PowerGeometric { b: -2.0, q: 1.0 },
            LevelSeq::Array { values: vec![1.0, 1.0, 0.3] },
        ] {
            assert!(
                WeightSystem::level(LevelSeq::Constant { c: 1.0 }, s.clone()).is_ok(),
                "rejected valid sigma {s:?}"
            );
        }
        // Invalid scales.
        for s in [
            LevelSeq::Constant { c: 0.0 },
            LevelSeq::Power { gamma: -0.1 },
            LevelSeq::Geometric { q: 1.5 },
            LevelSeq::PowerGeometric { b: 1.1, q: 0.5 }, // 2^1.1 * 0.5 > 1
            LevelSeq::LogExp { beta: 1.5 },
            LevelSeq::Array { values: vec![1.0, 1.2] },
            LevelSeq::Array { values: vec![1.0, 0.0] },
        ] {
            assert!(
                WeightSystem::level(LevelSeq::Constant { c: 1.0 }, s.clone()).is_err(),
                "accepted invalid sigma {s:?}"
            );
        }
        // Alpha may grow or vanish, but not go negative.
        assert!(WeightSystem::level(
            LevelSeq::Geometric { q: 2.0 },
            LevelSeq::Constant { c: 1.0 }
        )
        .is_ok());
        assert!(WeightSystem::level(
            LevelSeq::Array { values: vec![0.0, -1.0] },
            LevelSeq::Constant { c: 1.0 }
        )
        .is_err());
    }

    #[test]
    fn weight_spec_json_round_trips() {
        let ws = WeightSystem::from_json_str(
            r#"{"mode":"level","alpha":{"family":"power","gamma":1.0},"sigma":{"family":"constant","c":1.0}}"#,
        )
        .unwrap();
        let (a, s) = ws.level_seqs().unwrap();
        assert_eq!(a.value(1), 0.5);
        assert_eq!(s.value(9), 1.0);

        let pn = WeightSystem::from_json_str(
            r#"{"mode":"per-node","alpha":[1.0,2.0],"sigma":[1.0,0.5]}"#,
        )
        .unwrap();
        assert!(!pn.is_level());

        assert!(WeightSystem::from_json_str(
            r#"{"mode":"level","alpha":{"family":"constant","c":1.0},"sigma":{"family":"geometric","q":2.0}}"#,
        )
        .is_err());
    }

    #[test]
    fn products_simplify_within_families() {
        let a = LevelSeq::PowerGeometric { b: -0.75, q: 2.0 };
        let s = LevelSeq::Geometric { q: 0.5 };
        let p = LevelSeq::product(&a, &s);
        assert_eq!(p, LevelSeq::PowerGeometric { b: -0.75, q: 1.0 });
        for k in 0..50 {
            assert!((p.value(k) - a.value(k) * s.value(k)).abs() < 1e-12 * p.value(k).max(1.0));
        }
        // Mixed shift conventions stay as a product but evaluate correctly.
        let pk = LevelSeq::PowerK { gamma: 1.0, at0: 0.0 };
        let m = LevelSeq::product(&pk, &s);
        assert!(matches!(m, LevelSeq::Product { .. }));
        for k in 0..50 {
            assert!((m.value(k) - pk.value(k) * s.value(k)).abs() < 1e-300);
        }
    }

    #[test]
    fn monotonicity_classifier_is_sound() {
        assert_eq!(
            LevelSeq::PowerGeometric { b: -0.75, q: 2.0 }.is_non_decreasing(),
            Some(true)
        );
        assert_eq!(
            LevelSeq::PowerGeometric { b: -2.0, q: 2.0 }.is_non_decreasing(),
            Some(false)
        );
        assert_eq!(LevelSeq::Power { gamma: 1.0 }.is_non_decreasing(), Some(false));
        assert_eq!(
            LevelSeq::Array { values: vec![0.0, 1.0, 1.0, 2.0] }.is_non_decreasing(),
            Some(true)
        );
        // Spot-check the b < 0 boundary rule numerically.
        let t = LevelSeq::PowerGeometric { b: -1.0, q: 2.0 };
        assert_eq!(t.is_non_decreasing(), Some(true));
        for k in 0..100 {
            assert!(t.value(k + 1) >= t.value(k));
        }
    }
}
