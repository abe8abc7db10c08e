use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::crf::{CrfInstance, Hop1Clique, Hop2Clique, InstanceParts, Labeling, PairwiseGate};
use crate::error::{Error, Result};

/// Recipe for a synthetic grid instance.
///
/// Nodes are the cells of a `width × height` grid with 4-connectivity. The
/// ground truth is background (label 0) with rectangular objects painted on
/// top; every object can back a HOP1 clique, and HOP2 cliques are smaller
/// objects nested inside a host object whose unaries lean towards the host
/// label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub width: usize,
    pub height: usize,
    pub num_labels: usize,
    /// Unary noise σ_u: scales the Gaussian perturbation of the unary logits.
    #[serde(default = "defaults::unary_noise")]
    pub unary_noise: f64,
    /// Logit gap between the true label and the rest before noise.
    #[serde(default = "defaults::unary_scale")]
    pub unary_scale: f64,
    /// Feature noise σ_f added to the hypercolumn prototypes.
    #[serde(default = "defaults::feature_noise")]
    pub feature_noise: f64,
    /// Hypercolumn dimension; 0 means `num_labels`.
    #[serde(default)]
    pub hypercolumn_dim: usize,
    /// Rectangular objects painted over the background.
    #[serde(default = "defaults::objects")]
    pub objects: usize,
    /// How many of the objects back a HOP1 clique.
    #[serde(default = "defaults::hop1_cliques")]
    pub hop1_cliques: usize,
    /// Nested objects, each backing one HOP2 clique.
    #[serde(default)]
    pub hop2_cliques: usize,
    /// Range of `w_b · c_b` for HOP1 cliques.
    #[serde(default = "defaults::hop1_strength")]
    pub hop1_strength: [f64; 2],
    #[serde(default = "defaults::hop2_penalty")]
    pub hop2_penalty: [f64; 2],
    #[serde(default = "defaults::hop2_divisor")]
    pub hop2_divisor: [f64; 2],
    /// Share of a nested object's unary evidence that goes to its host label.
    #[serde(default = "defaults::hop2_miss")]
    pub hop2_miss: f64,
    /// Smallest side of a nested object, capped by its host's side.
    #[serde(default = "defaults::nested_min_side")]
    pub nested_min_side: usize,
    #[serde(default = "defaults::pairwise_alpha")]
    pub pairwise_alpha: f64,
    #[serde(default = "defaults::pairwise_beta")]
    pub pairwise_beta: f64,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn unary_noise() -> f64 {
        0.3
    }
    pub fn unary_scale() -> f64 {
        2.0
    }
    pub fn feature_noise() -> f64 {
        0.2
    }
    pub fn objects() -> usize {
        2
    }
    pub fn hop1_cliques() -> usize {
        2
    }
    pub fn hop1_strength() -> [f64; 2] {
        [0.2, 0.6]
    }
    pub fn hop2_penalty() -> [f64; 2] {
        [2.0, 3.0]
    }
    pub fn hop2_divisor() -> [f64; 2] {
        [2.0, 2.0]
    }
    pub fn nested_min_side() -> usize {
        1
    }
    pub fn hop2_miss() -> f64 {
        0.65
    }
    pub fn pairwise_alpha() -> f64 {
        0.5
    }
    pub fn pairwise_beta() -> f64 {
        1.5
    }
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            width: 4,
            height: 4,
            num_labels: 3,
            unary_noise: defaults::unary_noise(),
            unary_scale: defaults::unary_scale(),
            feature_noise: defaults::feature_noise(),
            hypercolumn_dim: 0,
            objects: defaults::objects(),
            hop1_cliques: defaults::hop1_cliques(),
            hop2_cliques: 0,
            hop1_strength: defaults::hop1_strength(),
            hop2_penalty: defaults::hop2_penalty(),
            hop2_divisor: defaults::hop2_divisor(),
            hop2_miss: defaults::hop2_miss(),
            nested_min_side: defaults::nested_min_side(),
            pairwise_alpha: defaults::pairwise_alpha(),
            pairwise_beta: defaults::pairwise_beta(),
            seed: 0,
        }
    }
}

impl InstanceSpec {
    pub fn num_nodes(&self) -> usize {
        self.width * self.height
    }

    /// Feature dimension of generated instances: unary distribution, its
    /// entropy, the label of the node's HOP1 box (one-hot scaled by the
    /// detection confidence), the label of its HOP2 box (one-hot) and the
    /// hit count that box requires.
    pub fn num_features(&self) -> usize {
        3 * self.num_labels + 2
    }

    /// A spec with every higher-order and pairwise term switched off.
    pub fn unary_only(mut self) -> Self {
        self.hop1_cliques = 0;
        self.hop2_cliques = 0;
        self.pairwise_alpha = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("width and height must be at least 1");
        }
        if self.num_labels < 2 {
            return bad("num_labels must be at least 2");
        }
        if !(self.unary_noise >= 0.0 && self.feature_noise >= 0.0) {
            return bad("noise levels must be >= 0");
        }
        if !(self.unary_scale > 0.0 && self.unary_scale.is_finite()) {
            return bad("unary_scale must be positive");
        }
        if self.hop1_cliques > self.objects {
            return bad("hop1_cliques cannot exceed objects");
        }
        let range_ok = |r: [f64; 2], lo: f64| r[0] <= r[1] && r[0] >= lo && r[1].is_finite();
        if !range_ok(self.hop1_strength, 0.0) || !range_ok(self.hop2_penalty, 0.0) {
            return bad("clique parameter ranges must be ordered and non-negative");
        }
        if !range_ok(self.hop2_divisor, 0.0) || self.hop2_divisor[0] <= 1.0 {
            return bad("hop2_divisor range must lie above 1");
        }
        if !(0.0..=1.0).contains(&self.hop2_miss) {
            return bad("hop2_miss must lie in [0, 1]");
        }
        if !self.pairwise_alpha.is_finite() || !self.pairwise_beta.is_finite() {
            return bad("pairwise gate parameters must be finite");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

impl Rect {
    fn cells(&self, width: usize) -> impl Iterator<Item = usize> + '_ {
        (self.y..self.y + self.h).flat_map(move |r| (self.x..self.x + self.w).map(move |c| r * width + c))
    }
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..range[1])
    }
}

fn random_rect(rng: &mut ChaCha8Rng, x0: usize, y0: usize, width: usize, height: usize, max_frac: f64, min_side: usize) -> Rect {
    let min_w = min_side.clamp(1, width);
    let min_h = min_side.clamp(1, height);
    let max_w = ((width as f64 * max_frac).round() as usize).clamp(min_w, width);
    let max_h = ((height as f64 * max_frac).round() as usize).clamp(min_h, height);
    let w = rng.random_range(min_w..=max_w);
    let h = rng.random_range(min_h..=max_h);
    let x = x0 + rng.random_range(0..=width - w);
    let y = y0 + rng.random_range(0..=height - h);
    Rect { x, y, w, h }
}

/// Shannon entropy (nats) of a distribution.
pub(crate) fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// Generates one instance and its planted ground truth. Deterministic in the
/// spec (seed included).
pub fn generate(spec: &InstanceSpec) -> Result<(CrfInstance, Labeling)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h, n, l) = (spec.width, spec.height, spec.num_nodes(), spec.num_labels);

    let mut truth = vec![0usize; n];
    let mut objects = Vec::with_capacity(spec.objects);
    for _ in 0..spec.objects {
        let rect = random_rect(&mut rng, 0, 0, w, h, 0.6, 1);
        let label = rng.random_range(1..l);
        for c in rect.cells(w) {
            truth[c] = label;
        }
        objects.push((rect, label));
    }

    // Nested objects: a smaller box inside a host object (or the whole grid
    // when there are no objects), labeled differently from the host.
    let mut nested = Vec::with_capacity(spec.hop2_cliques);
    let mut host_of = vec![None; n];
    for _ in 0..spec.hop2_cliques {
        let (host, host_label) = if objects.is_empty() {
            (Rect { x: 0, y: 0, w, h }, 0)
        } else {
            objects[rng.random_range(0..objects.len())]
        };
        let rect = random_rect(&mut rng, host.x, host.y, host.w, host.h, 0.5, spec.nested_min_side);
        let mut label = rng.random_range(0..l - 1);
        if label >= host_label {
            label += 1;
        }
        for c in rect.cells(w) {
            truth[c] = label;
            host_of[c] = Some(host_label);
        }
        nested.push((rect, label));
    }

    let mut hop1 = Vec::new();
    for &(rect, label) in objects.iter().take(spec.hop1_cliques) {
        let members: Vec<usize> = rect.cells(w).filter(|&c| truth[c] == label).collect();
        let confidence = rng.random_range(0.5..=1.0);
        let strength = uniform(&mut rng, spec.hop1_strength);
        if !members.is_empty() {
            hop1.push(Hop1Clique {
                members,
                label,
                confidence,
                weight: strength / confidence,
            });
        }
    }
    let mut hop2 = Vec::new();
    for &(rect, label) in &nested {
        // A later nested box may have painted over part of this one.
        let members: Vec<usize> = rect.cells(w).filter(|&c| truth[c] == label).collect();
        let penalty = uniform(&mut rng, spec.hop2_penalty);
        let divisor = uniform(&mut rng, spec.hop2_divisor);
        if !members.is_empty() {
            hop2.push(Hop2Clique {
                members,
                label,
                penalty,
                divisor,
            });
        }
    }

    let mut unary = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n);
    for i in 0..n {
        let mut logits = vec![0.0; l];
        match host_of[i] {
            Some(host) if truth[i] != host => {
                logits[truth[i]] += 1.0 - spec.hop2_miss;
                logits[host] += spec.hop2_miss;
            }
            _ => logits[truth[i]] += 1.0,
        }
        for z in &mut logits {
            let eps: f64 = StandardNormal.sample(&mut rng);
            *z = spec.unary_scale * (*z + 2.0 * spec.unary_noise * eps);
        }
        let p = crate::crf::softmax(&logits);
        unary.push(p.iter().map(|v| -v.max(1e-300).ln()).collect::<Vec<f64>>());
        dists.push(p);
    }

    let g_dim = if spec.hypercolumn_dim == 0 { l } else { spec.hypercolumn_dim };
    let prototypes: Vec<Vec<f64>> = (0..l)
        .map(|c| {
            if g_dim >= l {
                let mut v = vec![0.0; g_dim];
                v[c] = 1.0;
                v
            } else {
                let v: Vec<f64> = (0..g_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|x| x / norm).collect()
            }
        })
        .collect();
    let hypercolumns: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            prototypes[truth[i]]
                .iter()
                .map(|&x| {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    x + spec.feature_noise * eps
                })
                .collect()
        })
        .collect();

    let mut box1 = vec![vec![0.0; l]; n];
    for c in &hop1 {
        for &m in &c.members {
            box1[m][c.label] = f64::max(box1[m][c.label], c.confidence);
        }
    }
    let mut box2 = vec![vec![0.0; l]; n];
    let mut needed = vec![0.0; n];
    for c in &hop2 {
        for &m in &c.members {
            box2[m][c.label] = 1.0;
            needed[m] = f64::max(needed[m], c.threshold());
        }
    }
    let node_features = (0..n)
        .map(|i| {
            let mut b = dists[i].clone();
            b.push(entropy(&dists[i]));
            b.extend_from_slice(&box1[i]);
            b.extend_from_slice(&box2[i]);
            b.push(needed[i]);
            b
        })
        .collect();

    let mut edges = Vec::with_capacity(2 * n);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                edges.push((i, i + 1));
            }
            if r + 1 < h {
                edges.push((i, i + w));
            }
        }
    }

    let instance = CrfInstance::new(InstanceParts {
        num_labels: l,
        edges,
        node_features,
        hypercolumns,
        unary,
        gate: PairwiseGate {
            alpha: spec.pairwise_alpha,
            beta: spec.pairwise_beta,
        },
        hop1,
        hop2,
    })?;
    Ok((instance, Labeling::from_labels(&truth)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::total_energy;

    #[test]
    fn noiseless_unaries_recover_truth() {
        let spec = InstanceSpec {
            width: 6,
            height: 5,
            unary_noise: 0.0,
            seed: 3,
            ..InstanceSpec::default()
        };
        let (inst, truth) = generate(&spec).unwrap();
        assert_eq!(inst.unary_argmin(), truth.to_complete().unwrap());
    }

    #[test]
    fn same_seed_same_instance() {
        let spec = InstanceSpec {
            hop2_cliques: 1,
            seed: 11,
            ..InstanceSpec::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = InstanceSpec { seed: 12, ..spec };
        assert_ne!(generate(&other).unwrap().0, generate(&InstanceSpec { seed: 11, ..other.clone() }).unwrap().0);
    }

    #[test]
    fn structure_matches_spec() {
        let spec = InstanceSpec {
            width: 5,
            height: 3,
            num_labels: 4,
            objects: 3,
            hop1_cliques: 2,
            hop2_cliques: 2,
            seed: 5,
            ..InstanceSpec::default()
        };
        let (inst, truth) = generate(&spec).unwrap();
        assert_eq!(inst.num_nodes(), 15);
        assert_eq!(inst.edges().len(), 4 * 3 + 5 * 2);
        assert_eq!(inst.num_features(), spec.num_features());
        assert!(inst.hop1().len() <= 2);
        assert!(!inst.hop2().is_empty() && inst.hop2().len() <= 2);
        for c in inst.hop1() {
            assert!(c.members.iter().all(|&m| truth.get(m) == Some(c.label)));
            assert!((c.scale() - 0.2).abs() < 0.4 + 1e-12);
        }
        for c in inst.hop2() {
            assert!(c.members.iter().all(|&m| truth.get(m) == Some(c.label)));
        }
    }

    #[test]
    fn zero_cliques() {
        let spec = InstanceSpec {
            objects: 0,
            hop1_cliques: 0,
            seed: 2,
            ..InstanceSpec::default()
        };
        let (inst, truth) = generate(&spec).unwrap();
        assert!(inst.hop1().is_empty() && inst.hop2().is_empty());
        assert!(truth.to_complete().unwrap().iter().all(|&y| y == 0));
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            InstanceSpec {
                width: 0,
                ..InstanceSpec::default()
            },
            InstanceSpec {
                num_labels: 1,
                ..InstanceSpec::default()
            },
            InstanceSpec {
                unary_noise: -0.1,
                ..InstanceSpec::default()
            },
            InstanceSpec {
                hop2_divisor: [1.0, 2.0],
                ..InstanceSpec::default()
            },
        ] {
            assert!(generate(&spec).is_err());
        }
    }

    #[test]
    fn truth_beats_random_labelings() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..5 {
            let spec = InstanceSpec {
                width: 6,
                height: 6,
                hop2_cliques: 1,
                seed,
                ..InstanceSpec::default()
            };
            let (inst, truth) = generate(&spec).unwrap();
            let e_truth = total_energy(&inst, &truth).unwrap();
            let worse = (0..1000)
                .filter(|_| {
                    let labels: Vec<usize> = (0..inst.num_nodes()).map(|_| rng.random_range(0..3)).collect();
                    crate::crf::energy_of(&inst, &labels) > e_truth
                })
                .count();
            assert!(worse >= 950, "seed {seed}: only {worse} random labelings are worse");
        }
    }
}
