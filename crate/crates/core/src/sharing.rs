//! Sharing policy: direction similarity between learned results, eligibility
//! thresholding and averaging of eligible results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A member's learned result at one iteration; the unit of sharing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientRecord {
    pub member_id: usize,
    pub iteration: usize,
    pub step: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroNormPolicy {
    Reject,
    /// A zero vector gets similarity -1 with everything.
    #[default]
    TreatAsDissimilar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharingConfig {
    /// Similarity threshold `mu`.
    pub mu: f64,
    #[serde(default)]
    pub zero_norm_policy: ZeroNormPolicy,
}

impl Default for SharingConfig {
    fn default() -> Self {
        SharingConfig {
            mu: 0.2,
            zero_norm_policy: ZeroNormPolicy::default(),
        }
    }
}

impl SharingConfig {
    pub fn validate(&self) -> Result<()> {
        // mu above 1 is accepted: it disables sharing entirely
        if self.mu.is_nan() {
            return Err(Error::Config(format!("sharing threshold mu is invalid: {}", self.mu)));
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `rho = 1 - | a/|a| - b/|b| |` with Euclidean norms. Ranges over `[-1, 1]`.
pub fn similarity(a: &[f64], b: &[f64], policy: ZeroNormPolicy) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("similarity operands", a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return match policy {
            ZeroNormPolicy::Reject => Err(Error::ZeroNorm),
            ZeroNormPolicy::TreatAsDissimilar => Ok(-1.0),
        };
    }
    let dist = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x / na - y / nb;
            d * d
        })
        .sum::<f64>()
        .sqrt();
    Ok(1.0 - dist)
}

/// An eligible candidate with its similarity to the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eligible<'a> {
    pub record: &'a GradientRecord,
    pub similarity: f64,
}

/// Candidates whose similarity to `reference` is at least `mu`, in their
/// original order. Candidates from the reference's own member are skipped.
pub fn eligible_gradients<'a>(
    reference: &GradientRecord,
    candidates: &'a [GradientRecord],
    cfg: &SharingConfig,
) -> Result<Vec<Eligible<'a>>> {
    let mut out = Vec::new();
    for c in candidates {
        if c.member_id == reference.member_id {
            continue;
        }
        if c.step.len() != reference.step.len() {
            return Err(Error::shape(
                format!("learned result of member {}", c.member_id),
                reference.step.len(),
                c.step.len(),
            ));
        }
        let rho = similarity(&reference.step, &c.step, cfg.zero_norm_policy)?;
        if rho >= cfg.mu {
            out.push(Eligible {
                record: c,
                similarity: rho,
            });
        }
    }
    Ok(out)
}

/// Element-wise mean of the given steps; `None` when there are none.
pub fn aggregate_shared<'a, I>(steps: I) -> Result<Option<Vec<f64>>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut sum: Option<Vec<f64>> = None;
    let mut count = 0usize;
    for s in steps {
        match sum.as_mut() {
            None => sum = Some(s.to_vec()),
            Some(acc) => {
                if acc.len() != s.len() {
                    return Err(Error::shape("aggregated learned result", acc.len(), s.len()));
                }
                acc.iter_mut().zip(s).for_each(|(a, b)| *a += b);
            }
        }
        count += 1;
    }
    Ok(sum.map(|mut acc| {
        let n = count as f64;
        acc.iter_mut().for_each(|v| *v /= n);
        acc
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const POLICY: ZeroNormPolicy = ZeroNormPolicy::TreatAsDissimilar;

    fn rec(member_id: usize, step: Vec<f64>) -> GradientRecord {
        GradientRecord {
            member_id,
            iteration: 0,
            step,
        }
    }

    #[test]
    fn identical_direction() {
        assert!((similarity(&[3.0, 4.0], &[3.0, 4.0], POLICY).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn opposite_direction() {
        assert!((similarity(&[1.0, 0.0], &[-1.0, 0.0], POLICY).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_direction() {
        let rho = similarity(&[1.0, 0.0], &[0.0, 1.0], POLICY).unwrap();
        assert!((rho - (1.0 - 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn zero_norm_policies() {
        assert_eq!(similarity(&[0.0, 0.0], &[1.0, 0.0], POLICY).unwrap(), -1.0);
        assert!(matches!(
            similarity(&[0.0, 0.0], &[1.0, 0.0], ZeroNormPolicy::Reject),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn threshold_filters_opposite() {
        let reference = rec(0, vec![1.0, 0.0]);
        let cands = vec![rec(1, vec![2.0, 0.0]), rec(2, vec![-1.0, 0.0])];
        let cfg = SharingConfig { mu: 0.2, ..Default::default() };
        let e = eligible_gradients(&reference, &cands, &cfg).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].record.member_id, 1);
    }

    #[test]
    fn mu_minus_one_admits_all() {
        let reference = rec(0, vec![1.0, 0.0]);
        let cands = vec![rec(1, vec![-1.0, 0.0]), rec(2, vec![0.0, 1.0]), rec(3, vec![0.0, 0.0])];
        let cfg = SharingConfig { mu: -1.0, ..Default::default() };
        let ids: Vec<_> = eligible_gradients(&reference, &cands, &cfg)
            .unwrap()
            .iter()
            .map(|e| e.record.member_id)
            .collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn own_member_never_eligible() {
        let reference = rec(4, vec![1.0, 0.0]);
        let cands = vec![rec(4, vec![1.0, 0.0])];
        let cfg = SharingConfig { mu: -1.0, ..Default::default() };
        assert!(eligible_gradients(&reference, &cands, &cfg).unwrap().is_empty());
        assert!(eligible_gradients(&reference, &[], &cfg).unwrap().is_empty());
    }

    #[test]
    fn mismatched_candidate_names_member() {
        let reference = rec(0, vec![1.0, 0.0]);
        let cands = vec![rec(7, vec![1.0])];
        match eligible_gradients(&reference, &cands, &SharingConfig::default()) {
            Err(Error::Shape { context, .. }) => assert!(context.contains('7')),
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn aggregate_examples() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let mean = aggregate_shared([&a[..], &b[..]]).unwrap().unwrap();
        assert_eq!(mean, vec![0.5, 0.5]);
        assert_eq!(aggregate_shared([&a[..]]).unwrap().unwrap(), vec![1.0, 0.0]);
        assert_eq!(aggregate_shared(std::iter::empty::<&[f64]>()).unwrap(), None);
        assert!(aggregate_shared([&a[..], &[1.0][..]]).is_err());
    }
}
