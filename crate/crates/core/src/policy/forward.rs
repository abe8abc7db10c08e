use crate::crf::{CrfInstance, Labeling};
use crate::error::{Error, Result};

use super::{PolicyParams, RoundParams};

/// Network input for one state: the labeled tag and one-hot label of every
/// node. Node features come from the instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeEncoding {
    labels: Vec<Option<usize>>,
    num_labels: usize,
}

impl NodeEncoding {
    pub fn new(labeling: &Labeling, num_labels: usize) -> Result<Self> {
        if let Some(l) = labeling.as_slice().iter().flatten().find(|&&l| l >= num_labels) {
            return Err(Error::Shape(format!("label {l} out of range for {num_labels} labels")));
        }
        Ok(Self {
            labels: labeling.as_slice().to_vec(),
            num_labels,
        })
    }

    pub fn tag(&self, node: usize) -> f64 {
        if self.labels[node].is_some() {
            1.0
        } else {
            0.0
        }
    }

    pub fn one_hot(&self, node: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.num_labels];
        if let Some(l) = self.labels[node] {
            v[l] = 1.0;
        }
        v
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }
}

/// `θ3⁽ᵏ⁾ b_i` for every node, flat `N × p`.
pub(crate) fn feature_drive(round: &RoundParams, instance: &CrfInstance) -> Vec<f64> {
    let p = round.tag.len();
    let f = instance.num_features();
    let theta = round.features.as_slice().unwrap();
    let mut out = vec![0.0; instance.num_nodes() * p];
    for i in 0..instance.num_nodes() {
        let b = instance.features(i);
        let row = &mut out[i * p..(i + 1) * p];
        for (r, o) in row.iter_mut().enumerate() {
            *o = dot(&theta[r * f..(r + 1) * f], b);
        }
    }
    out
}

/// `Σ_j w(i,j) μ_j` over the neighbors of `node`.
#[inline]
pub(crate) fn aggregate(instance: &CrfInstance, node: usize, mu: &[f64], p: usize, out: &mut [f64]) {
    out.fill(0.0);
    for (nb, &w) in instance.neighbors(node).iter().zip(instance.weight_row(node)) {
        let src = &mu[nb.node * p..(nb.node + 1) * p];
        for (o, &m) in out.iter_mut().zip(src) {
            *o += w * m;
        }
    }
}

/// Pre-activation of one node for one round.
#[inline]
pub(crate) fn preactivation(round: &RoundParams, drive: &[f64], label: Option<usize>, agg: &[f64], out: &mut [f64]) {
    let p = drive.len();
    let tag = round.tag.as_slice().unwrap();
    let label_w = round.label.as_slice().unwrap();
    let num_labels = round.label.ncols();
    let neigh = round.neighbors.as_slice().unwrap();
    for r in 0..p {
        let mut v = drive[r];
        if let Some(y) = label {
            v += tag[r];
            v += label_w[r * num_labels + y];
        }
        v += dot(&neigh[r * p..(r + 1) * p], agg);
        out[r] = v;
    }
}

#[inline]
pub(crate) fn output_row(params: &PolicyParams, mu: &[f64], out: &mut [f64]) {
    let p = mu.len();
    let theta = params.output.as_slice().unwrap();
    for (l, o) in out.iter_mut().enumerate() {
        *o = dot(&theta[l * p..(l + 1) * p], mu);
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Result of a full forward pass, with every intermediate the backward pass
/// needs.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    revision: u64,
    encoding: NodeEncoding,
    embed_dim: usize,
    /// Per round `k`: the neighbor aggregate of `μ⁽ᵏ⁾`, flat `N × p`.
    agg: Vec<Vec<f64>>,
    /// Per round: pre-activations, flat `N × p`.
    pre: Vec<Vec<f64>>,
    /// `μ⁽⁰⁾ … μ⁽ᴷ⁾`, flat `N × p` each.
    pub(super) mu: Vec<Vec<f64>>,
    pub(super) scores: Vec<f64>,
}

impl ForwardPass {
    /// Raw scores of every node (labeled ones included), flat `N × |L|`.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn node_scores(&self, node: usize) -> &[f64] {
        let l = self.encoding.num_labels;
        &self.scores[node * l..(node + 1) * l]
    }

    pub fn encoding(&self) -> &NodeEncoding {
        &self.encoding
    }

    pub fn num_nodes(&self) -> usize {
        self.encoding.labels.len()
    }

    /// Scores as seen by action selection: labeled nodes are `−∞`.
    pub fn action_scores(&self) -> Vec<f64> {
        let l = self.encoding.num_labels;
        let mut out = self.scores.clone();
        for (i, lab) in self.encoding.labels.iter().enumerate() {
            if lab.is_some() {
                out[i * l..(i + 1) * l].fill(f64::NEG_INFINITY);
            }
        }
        out
    }

    /// Final node embeddings `μ⁽ᴷ⁾`, flat `N × p`.
    pub fn embeddings(&self) -> &[f64] {
        self.mu.last().unwrap()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }
}

/// Full forward pass for the state encoded by `labeling`.
pub fn forward(params: &PolicyParams, instance: &CrfInstance, labeling: &Labeling) -> Result<ForwardPass> {
    params.check_compatible(instance)?;
    if labeling.len() != instance.num_nodes() {
        return Err(Error::Shape(format!(
            "labeling has {} nodes, instance has {}",
            labeling.len(),
            instance.num_nodes()
        )));
    }
    let encoding = NodeEncoding::new(labeling, instance.num_labels())?;
    let n = instance.num_nodes();
    let p = params.shape.embed_dim;
    let num_labels = instance.num_labels();

    let mut mu = vec![vec![0.0; n * p]];
    let mut agg = Vec::with_capacity(params.rounds.len());
    let mut pre = Vec::with_capacity(params.rounds.len());
    for round in &params.rounds {
        let drive = feature_drive(round, instance);
        let prev = mu.last().unwrap();
        let mut agg_k = vec![0.0; n * p];
        let mut pre_k = vec![0.0; n * p];
        let mut next = vec![0.0; n * p];
        for i in 0..n {
            let a = &mut agg_k[i * p..(i + 1) * p];
            aggregate(instance, i, prev, p, a);
            let z = &mut pre_k[i * p..(i + 1) * p];
            preactivation(round, &drive[i * p..(i + 1) * p], encoding.labels[i], a, z);
            for (m, &v) in next[i * p..(i + 1) * p].iter_mut().zip(z.iter()) {
                *m = v.max(0.0);
            }
        }
        agg.push(agg_k);
        pre.push(pre_k);
        mu.push(next);
    }

    let last = mu.last().unwrap();
    let mut scores = vec![0.0; n * num_labels];
    for i in 0..n {
        output_row(
            params,
            &last[i * p..(i + 1) * p],
            &mut scores[i * num_labels..(i + 1) * num_labels],
        );
    }
    Ok(ForwardPass {
        revision: params.revision,
        encoding,
        embed_dim: p,
        agg,
        pre,
        mu,
        scores,
    })
}

/// Exact gradients of `Σ_i,l upstream[i,l] · π[i,l]` with respect to every
/// parameter. The relu subgradient at 0 is 0.
pub fn backward(
    params: &PolicyParams,
    pass: &ForwardPass,
    instance: &CrfInstance,
    upstream: &[f64],
) -> Result<PolicyParams> {
    if pass.revision != params.revision {
        return Err(Error::Stale(
            "forward pass was computed with different parameters".into(),
        ));
    }
    let n = pass.num_nodes();
    let p = pass.embed_dim;
    let num_labels = params.shape.num_labels;
    if n != instance.num_nodes() {
        return Err(Error::Stale("forward pass belongs to a different instance".into()));
    }
    if upstream.len() != n * num_labels {
        return Err(Error::Shape(format!(
            "upstream gradient has {} entries, expected {}",
            upstream.len(),
            n * num_labels
        )));
    }

    let mut grads = PolicyParams::zeros(params.shape);
    let f = params.shape.num_features;
    let theta5 = params.output.as_slice().unwrap();
    let mut dmu = vec![0.0; n * p];
    {
        let g5 = grads.output.as_slice_mut().unwrap();
        let last = pass.mu.last().unwrap();
        for i in 0..n {
            let mu_i = &last[i * p..(i + 1) * p];
            for l in 0..num_labels {
                let u = upstream[i * num_labels + l];
                if u == 0.0 {
                    continue;
                }
                for c in 0..p {
                    g5[l * p + c] += u * mu_i[c];
                    dmu[i * p + c] += u * theta5[l * p + c];
                }
            }
        }
    }

    let mut dpre = vec![0.0; n * p];
    for k in (0..params.rounds.len()).rev() {
        let round = &params.rounds[k];
        let pre = &pass.pre[k];
        for (d, (&g, &z)) in dpre.iter_mut().zip(dmu.iter().zip(pre)) {
            *d = if z > 0.0 { g } else { 0.0 };
        }
        let gr = &mut grads.rounds[k];
        let g_tag = gr.tag.as_slice_mut().unwrap();
        let g_label = gr.label.as_slice_mut().unwrap();
        let g_feat = gr.features.as_slice_mut().unwrap();
        let g_neigh = gr.neighbors.as_slice_mut().unwrap();
        let agg = &pass.agg[k];
        for i in 0..n {
            let d = &dpre[i * p..(i + 1) * p];
            if d.iter().all(|&v| v == 0.0) {
                continue;
            }
            let b = instance.features(i);
            let a = &agg[i * p..(i + 1) * p];
            let label = pass.encoding.labels[i];
            for r in 0..p {
                let dr = d[r];
                if dr == 0.0 {
                    continue;
                }
                if let Some(y) = label {
                    g_tag[r] += dr;
                    g_label[r * num_labels + y] += dr;
                }
                for (g, &bv) in g_feat[r * f..(r + 1) * f].iter_mut().zip(b) {
                    *g += dr * bv;
                }
                for (g, &av) in g_neigh[r * p..(r + 1) * p].iter_mut().zip(a) {
                    *g += dr * av;
                }
            }
        }
        if k == 0 {
            break;
        }
        // Push the gradient through the aggregate into μ⁽ᵏ⁾.
        let theta4 = round.neighbors.as_slice().unwrap();
        let mut next = vec![0.0; n * p];
        let mut dagg = vec![0.0; p];
        for i in 0..n {
            let d = &dpre[i * p..(i + 1) * p];
            if d.iter().all(|&v| v == 0.0) {
                continue;
            }
            dagg.fill(0.0);
            for r in 0..p {
                let dr = d[r];
                if dr == 0.0 {
                    continue;
                }
                for (g, &t) in dagg.iter_mut().zip(&theta4[r * p..(r + 1) * p]) {
                    *g += dr * t;
                }
            }
            for (nb, &w) in instance.neighbors(i).iter().zip(instance.weight_row(i)) {
                let dst = &mut next[nb.node * p..(nb.node + 1) * p];
                for (o, &g) in dst.iter_mut().zip(&dagg) {
                    *o += w * g;
                }
            }
        }
        dmu = next;
    }
    Ok(grads)
}
