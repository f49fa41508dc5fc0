//! Temporal model parameters: meeting probabilities and activation windows.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::NetGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeetingMode {
    /// Every edge uses `meeting_prob_m`.
    GlobalConstant,
    /// m(u,v) = c / (d_out(u) + c).
    EgoCentric,
    /// Explicit per-edge table in `per_edge_m`, indexed by edge id.
    PerEdge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AwMode {
    /// Reading seconds drawn from the weighted geometric mixture.
    MixtureRaw,
    /// Reading seconds drawn from one geometric with success prob `aw_rate`.
    LearnedSingle,
    /// Always `aw_constant_hops`.
    Constant,
    /// Uniform on 0..=aw_uniform_max hops.
    Uniform,
    /// `aw_custom_pmf[h]` is the probability of h hops.
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub success_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub meeting_prob_f: f64,
    pub meeting_mode: MeetingMode,
    pub meeting_prob_m: f64,
    pub ego_c: f64,
    pub per_edge_m: Vec<f64>,
    pub aw_mode: AwMode,
    pub aw_zero_probability: f64,
    pub aw_mixture: Vec<MixtureComponent>,
    pub aw_rate: f64,
    pub base_hop_seconds: f64,
    pub aw_constant_hops: u32,
    pub aw_uniform_max: u32,
    pub aw_custom_pmf: Vec<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            meeting_prob_f: 1.0,
            meeting_mode: MeetingMode::GlobalConstant,
            meeting_prob_m: 1.0 / 6.0,
            ego_c: 1.0,
            per_edge_m: Vec::new(),
            aw_mode: AwMode::LearnedSingle,
            aw_zero_probability: 0.6,
            aw_mixture: vec![
                MixtureComponent { weight: 0.76, success_prob: 1.0 / 57.0 },
                MixtureComponent { weight: 0.24, success_prob: 1.0 / 123.0 },
            ],
            aw_rate: 1.0 / 74.0,
            base_hop_seconds: 200.0,
            aw_constant_hops: 0,
            aw_uniform_max: 0,
            aw_custom_pmf: vec![1.0],
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {p} must lie in (0,1]")))
    }
}

impl ModelParams {
    /// The classical competitive cascade: unit meeting lengths, zero windows.
    pub fn cic() -> Self {
        ModelParams {
            meeting_prob_m: 1.0,
            aw_mode: AwMode::Constant,
            aw_constant_hops: 0,
            ..Self::default()
        }
    }

    /// Unit meeting lengths and zero windows for both campaigns while keeping
    /// every other knob.
    pub fn temporal_off(&self) -> Self {
        ModelParams {
            meeting_prob_f: 1.0,
            meeting_mode: MeetingMode::GlobalConstant,
            meeting_prob_m: 1.0,
            aw_mode: AwMode::Constant,
            aw_constant_hops: 0,
            ..self.clone()
        }
    }

    pub fn read_probability(&self) -> f64 {
        1.0 - self.aw_zero_probability
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("meeting_prob_f", self.meeting_prob_f)?;
        match self.meeting_mode {
            MeetingMode::GlobalConstant => check_prob("meeting_prob_m", self.meeting_prob_m)?,
            MeetingMode::EgoCentric => {
                if !(self.ego_c > 0.0 && self.ego_c.is_finite()) {
                    return Err(invalid(format!("ego-centric smoothing c = {} must be > 0", self.ego_c)));
                }
            }
            MeetingMode::PerEdge => {
                for (i, &m) in self.per_edge_m.iter().enumerate() {
                    check_prob(&format!("per_edge_m[{i}]"), m)?;
                }
            }
        }
        if !(0.0..=1.0).contains(&self.aw_zero_probability) {
            return Err(invalid(format!(
                "aw_zero_probability = {} must lie in [0,1]",
                self.aw_zero_probability
            )));
        }
        if !(self.base_hop_seconds > 0.0 && self.base_hop_seconds.is_finite()) {
            return Err(invalid("base_hop_seconds must be positive"));
        }
        match self.aw_mode {
            AwMode::LearnedSingle => check_prob("aw_rate", self.aw_rate)?,
            AwMode::MixtureRaw => {
                if self.aw_mixture.is_empty() {
                    return Err(invalid("aw_mixture is empty"));
                }
                let mut total = 0.0;
                for c in &self.aw_mixture {
                    check_prob("aw_mixture success_prob", c.success_prob)?;
                    if c.weight < 0.0 {
                        return Err(invalid("aw_mixture weights must be non-negative"));
                    }
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(invalid(format!("aw_mixture weights sum to {total}, not 1")));
                }
            }
            AwMode::Custom => {
                if self.aw_custom_pmf.iter().any(|&p| !(p >= 0.0)) {
                    return Err(invalid("aw_custom_pmf has a negative entry"));
                }
                let total: f64 = self.aw_custom_pmf.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(invalid(format!("aw_custom_pmf sums to {total}, not 1")));
                }
            }
            AwMode::Constant | AwMode::Uniform => {}
        }
        Ok(())
    }
}

/// Per-edge meeting probability for campaign M.
pub fn assign_meeting_probs(g: &NetGraph, params: &ModelParams) -> Result<Vec<f64>> {
    params.validate()?;
    match params.meeting_mode {
        MeetingMode::GlobalConstant => Ok(vec![params.meeting_prob_m; g.edge_count()]),
        MeetingMode::EgoCentric => {
            let c = params.ego_c;
            Ok(g
                .edges()
                .iter()
                .map(|e| c / (g.out_degree(e.source) as f64 + c))
                .collect())
        }
        MeetingMode::PerEdge => {
            if params.per_edge_m.len() != g.edge_count() {
                return Err(invalid(format!(
                    "per_edge_m has {} entries for {} edges",
                    params.per_edge_m.len(),
                    g.edge_count()
                )));
            }
            Ok(params.per_edge_m.clone())
        }
    }
}

/// Geometric number of steps until a meeting succeeds: Pr[h = t] = (1-m)^(t-1) m.
pub fn sample_meeting_length<R: Rng + ?Sized>(m: f64, rng: &mut R) -> Result<u32> {
    check_prob("meeting probability", m)?;
    Ok(meeting_length(m, rng))
}

pub(crate) fn meeting_length<R: Rng + ?Sized>(m: f64, rng: &mut R) -> u32 {
    if m >= 1.0 {
        return 1;
    }
    let failures = Geometric::new(m).expect("validated probability").sample(rng);
    failures.saturating_add(1).min(u32::MAX as u64) as u32
}

/// Activation-window length distribution resolved from [`ModelParams`].
#[derive(Clone, Debug)]
pub struct AwSampler {
    zero_probability: f64,
    base_seconds: f64,
    kind: AwKind,
}

#[derive(Clone, Debug)]
enum AwKind {
    Seconds(Vec<(f64, Geometric)>),
    Constant(u32),
    Uniform(u32),
    Table(Vec<f64>),
}

impl AwSampler {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let geo = |p: f64| Geometric::new(p).map_err(|e| invalid(format!("geometric({p}): {e}")));
        let kind = match params.aw_mode {
            AwMode::LearnedSingle => AwKind::Seconds(vec![(1.0, geo(params.aw_rate)?)]),
            AwMode::MixtureRaw => AwKind::Seconds(
                params
                    .aw_mixture
                    .iter()
                    .map(|c| Ok((c.weight, geo(c.success_prob)?)))
                    .collect::<Result<_>>()?,
            ),
            AwMode::Constant => AwKind::Constant(params.aw_constant_hops),
            AwMode::Uniform => AwKind::Uniform(params.aw_uniform_max),
            AwMode::Custom => AwKind::Table(params.aw_custom_pmf.clone()),
        };
        Ok(AwSampler {
            zero_probability: params.aw_zero_probability,
            base_seconds: params.base_hop_seconds,
            kind,
        })
    }

    /// Seconds to hops, rounding half away from zero.
    pub fn seconds_to_hops(&self, seconds: f64) -> u32 {
        (seconds / self.base_seconds).round() as u32
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if rng.random::<f64>() < self.zero_probability {
            return 0;
        }
        match &self.kind {
            AwKind::Constant(h) => *h,
            AwKind::Uniform(max) => rng.random_range(0..=*max),
            AwKind::Table(pmf) => {
                let mut u = rng.random::<f64>();
                for (h, &p) in pmf.iter().enumerate() {
                    if u < p {
                        return h as u32;
                    }
                    u -= p;
                }
                pmf.len().saturating_sub(1) as u32
            }
            AwKind::Seconds(parts) => {
                let geo = if parts.len() == 1 {
                    &parts[0].1
                } else {
                    let mut u = rng.random::<f64>();
                    let mut pick = &parts[parts.len() - 1].1;
                    for (w, g) in parts {
                        if u < *w {
                            pick = g;
                            break;
                        }
                        u -= w;
                    }
                    pick
                };
                // support starts at one second so the mean is 1/p
                let seconds = geo.sample(rng) as f64 + 1.0;
                self.seconds_to_hops(seconds)
            }
        }
    }
}

/// Draws one activation-window length in hops.
pub fn sample_aw_length<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Result<u32> {
    Ok(AwSampler::new(params)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{read_edge_list, ProbMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn global_constant_sixth() {
        let g = read_edge_list("0 1\n1 2\n2 0\n".as_bytes(), true, ProbMode::InverseIndegree).unwrap();
        let m = assign_meeting_probs(&g, &ModelParams::default()).unwrap();
        assert!(m.iter().all(|&x| x == 1.0 / 6.0));
    }

    #[test]
    fn ego_centric_formula() {
        let g = read_edge_list("0 1\n2 3\n2 4\n2 5\n2 6\n2 7\n".as_bytes(), true, ProbMode::InverseIndegree)
            .unwrap();
        let mut p = ModelParams { meeting_mode: MeetingMode::EgoCentric, ego_c: 1.0, ..Default::default() };
        let m = assign_meeting_probs(&g, &p).unwrap();
        assert_eq!(m[g.find_edge(0, 1).unwrap() as usize], 0.5);
        p.ego_c = 5.0;
        let m = assign_meeting_probs(&g, &p).unwrap();
        assert_eq!(m[g.find_edge(2, 3).unwrap() as usize], 0.5);
        p.ego_c = 0.0;
        assert!(assign_meeting_probs(&g, &p).is_err());
    }

    #[test]
    fn meeting_length_validation_and_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_meeting_length(0.0, &mut rng).is_err());
        assert!(sample_meeting_length(1.2, &mut rng).is_err());
        assert!((0..100).all(|_| sample_meeting_length(1.0, &mut rng).unwrap() == 1));
    }

    #[test]
    fn zero_coin_always_zero() {
        let p = ModelParams { aw_zero_probability: 1.0, ..Default::default() };
        let s = AwSampler::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| s.sample(&mut rng) == 0));
    }

    #[test]
    fn exact_ratio_is_one_hop() {
        let s = AwSampler::new(&ModelParams::default()).unwrap();
        assert_eq!(s.seconds_to_hops(200.0), 1);
        assert_eq!(s.seconds_to_hops(100.0), 1);
        assert_eq!(s.seconds_to_hops(99.0), 0);
        assert_eq!(s.seconds_to_hops(300.0), 2);
    }

    #[test]
    fn mixture_weights_must_sum_to_one() {
        let mut p = ModelParams { aw_mode: AwMode::MixtureRaw, ..Default::default() };
        assert!(p.validate().is_ok());
        p.aw_mixture[0].weight = 0.5;
        assert!(p.validate().is_err());
    }
}
