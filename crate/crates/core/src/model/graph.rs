//! Executable layer DAG with reverse-mode gradients.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conv::{conv2d, conv2d_backward, ConvGrads, ConvParams};
use crate::error::{mismatch, Error, Result};
use crate::mask::{ExclusionSet, KernelMask, MaskShape, Offset};
use crate::tensor::{self, Tensor4};

use super::config::{ArchKind, ArchitectureConfig};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Input,
    Conv(usize),
    Relu,
    Concat,
    Add,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub op: Op,
    pub inputs: Vec<NodeId>,
    pub channels: usize,
}

/// One masked-conv branch as seen by the blind-spot analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchSpec {
    pub label: String,
    pub mask: MaskShape,
    pub kernel: usize,
    pub dilation: usize,
}

/// A built network: nodes in topological order plus the parameter registry.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGraph {
    pub(crate) kind: ArchKind,
    pub(crate) config: ArchitectureConfig,
    pub(crate) nodes: Vec<Node>,
    pub(crate) params: Vec<ConvParams>,
    pub(crate) names: Vec<String>,
    pub(crate) branches: Vec<BranchSpec>,
    pub(crate) output: NodeId,
}

/// Activations kept from a forward pass for [`ModelGraph::backward`].
pub struct Tape {
    acts: Vec<Tensor4>,
}

impl Tape {
    pub fn output(&self) -> &Tensor4 {
        self.acts.last().expect("tape is never empty")
    }
}

/// Gradients of a scalar with respect to every layer and the input.
#[derive(Clone, Debug)]
pub struct ModelGrads {
    pub params: Vec<ConvGrads>,
    pub input: Tensor4,
}

/// Incremental DAG construction used by the builders.
pub(crate) struct GraphBuilder {
    nodes: Vec<Node>,
    params: Vec<ConvParams>,
    names: Vec<String>,
}

impl GraphBuilder {
    pub fn new(in_channels: usize) -> Self {
        Self {
            nodes: vec![Node {
                op: Op::Input,
                inputs: vec![],
                channels: in_channels,
            }],
            params: vec![],
            names: vec![],
        }
    }

    pub fn input(&self) -> NodeId {
        0
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, channels: usize) -> NodeId {
        self.nodes.push(Node {
            op,
            inputs,
            channels,
        });
        self.nodes.len() - 1
    }

    pub fn conv(
        &mut self,
        name: String,
        src: NodeId,
        out: usize,
        k: usize,
        dilation: usize,
        mask: Option<KernelMask>,
    ) -> Result<NodeId> {
        let p = ConvParams::new(self.nodes[src].channels, out, k, dilation, mask)?;
        self.params.push(p);
        self.names.push(name);
        Ok(self.push(Op::Conv(self.params.len() - 1), vec![src], out))
    }

    pub fn pointwise(&mut self, name: String, src: NodeId, out: usize) -> Result<NodeId> {
        self.conv(name, src, out, 1, 1, None)
    }

    pub fn relu(&mut self, src: NodeId) -> NodeId {
        let c = self.nodes[src].channels;
        self.push(Op::Relu, vec![src], c)
    }

    pub fn concat(&mut self, srcs: Vec<NodeId>) -> NodeId {
        if srcs.len() == 1 {
            return srcs[0];
        }
        let c = srcs.iter().map(|&s| self.nodes[s].channels).sum();
        self.push(Op::Concat, srcs, c)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let c = self.nodes[a].channels;
        debug_assert_eq!(c, self.nodes[b].channels);
        self.push(Op::Add, vec![a, b], c)
    }

    pub fn finish(
        self,
        kind: ArchKind,
        config: ArchitectureConfig,
        branches: Vec<BranchSpec>,
        output: NodeId,
    ) -> ModelGraph {
        debug_assert_eq!(output, self.nodes.len() - 1);
        ModelGraph {
            kind,
            config,
            nodes: self.nodes,
            params: self.params,
            names: self.names,
            branches,
            output,
        }
    }
}

impl ModelGraph {
    pub fn kind(&self) -> ArchKind {
        self.kind
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn params(&self) -> &[ConvParams] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [ConvParams] {
        &mut self.params
    }

    pub fn layer_names(&self) -> &[String] {
        &self.names
    }

    /// Masked-conv branches, in construction order.
    pub fn branches(&self) -> &[BranchSpec] {
        &self.branches
    }

    /// Trainable scalars, masked (zero-held) taps included.
    pub fn count_params(&self) -> usize {
        self.params.iter().map(ConvParams::num_params).sum()
    }

    /// Number of convolutions that carry a kernel mask.
    pub fn masked_conv_count(&self) -> usize {
        self.params.iter().filter(|p| p.mask.is_some()).count()
    }

    /// Kaiming-uniform initialization of every layer from one seed.
    pub fn init_weights(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.params {
            p.kaiming_init(&mut rng);
        }
    }

    /// Positive weights for reachability probing: no ReLU is ever cut off,
    /// so every structural path carries signal.
    pub fn init_probe_weights(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.params {
            p.positive_init(&mut rng);
        }
    }

    pub fn zero_weights(&mut self) {
        for p in &mut self.params {
            p.weight.data_mut().fill(0.0);
            p.bias.fill(0.0);
        }
    }

    /// Zeroes the final layer so the network outputs exactly zero.
    pub fn zero_output_layer(&mut self) {
        if let Some(p) = self.params.last_mut() {
            p.weight.data_mut().fill(0.0);
            p.bias.fill(0.0);
        }
    }

    fn check_input(&self, input: &Tensor4) -> Result<()> {
        if input.channels() != self.config.in_channels {
            return Err(mismatch(
                "model input channels",
                self.config.in_channels,
                input.channels(),
            ));
        }
        Ok(())
    }

    fn eval_node(&self, node: &Node, acts: &[Option<Tensor4>]) -> Result<Tensor4> {
        let arg = |i: usize| -> &Tensor4 {
            acts[node.inputs[i]]
                .as_ref()
                .expect("activation freed early")
        };
        Ok(match node.op {
            Op::Input => unreachable!("input node is seeded directly"),
            Op::Conv(p) => conv2d(arg(0), &self.params[p])?,
            Op::Relu => tensor::relu(arg(0)),
            Op::Add => tensor::add(arg(0), arg(1))?,
            Op::Concat => {
                let parts: Vec<&Tensor4> = (0..node.inputs.len()).map(arg).collect();
                tensor::concat_channels(&parts)?
            }
        })
    }

    /// Inference pass; intermediate activations are released as soon as
    /// their last consumer has run.
    pub fn forward(&self, input: &Tensor4) -> Result<Tensor4> {
        self.check_input(input)?;
        let n = self.nodes.len();
        let mut last_use = vec![0usize; n];
        for (j, node) in self.nodes.iter().enumerate() {
            for &i in &node.inputs {
                last_use[i] = j;
            }
        }
        let mut acts: Vec<Option<Tensor4>> = vec![None; n];
        acts[0] = Some(input.clone());
        for j in 1..n {
            let node = &self.nodes[j];
            let out = self.eval_node(node, &acts)?;
            acts[j] = Some(out);
            for &i in &node.inputs {
                if last_use[i] == j && i != self.output {
                    acts[i] = None;
                }
            }
        }
        Ok(acts[self.output].take().expect("output computed"))
    }

    /// Forward pass that keeps every activation.
    pub fn forward_with_tape(&self, input: &Tensor4) -> Result<(Tensor4, Tape)> {
        self.check_input(input)?;
        let mut acts: Vec<Option<Tensor4>> = Vec::with_capacity(self.nodes.len());
        acts.push(Some(input.clone()));
        for node in &self.nodes[1..] {
            let out = self.eval_node(node, &acts)?;
            acts.push(Some(out));
        }
        let acts: Vec<Tensor4> = acts.into_iter().map(|a| a.expect("kept")).collect();
        Ok((acts[self.output].clone(), Tape { acts }))
    }

    /// Reverse pass for the scalar `sum(grad_out * output)`.
    pub fn backward(&self, tape: &Tape, grad_out: &Tensor4) -> Result<ModelGrads> {
        let out = &tape.acts[self.output];
        if grad_out.shape() != out.shape() {
            return Err(mismatch("model backward grad_out", out.shape(), grad_out.shape()));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor4>> = vec![None; n];
        grads[self.output] = Some(grad_out.clone());
        let mut pgrads: Vec<ConvGrads> = self.params.iter().map(ConvGrads::zeros_like).collect();

        fn accumulate(slot: &mut Option<Tensor4>, g: Tensor4) -> Result<()> {
            match slot {
                Some(acc) => tensor::add_assign(acc, &g),
                None => {
                    *slot = Some(g);
                    Ok(())
                }
            }
        }

        for j in (1..n).rev() {
            let Some(g) = grads[j].take() else { continue };
            let node = &self.nodes[j];
            match node.op {
                Op::Input => unreachable!(),
                Op::Conv(p) => {
                    let x = &tape.acts[node.inputs[0]];
                    let (gi, gp) = conv2d_backward(&g, x, &self.params[p])?;
                    pgrads[p] = gp;
                    accumulate(&mut grads[node.inputs[0]], gi)?;
                }
                Op::Relu => {
                    let gi = tensor::relu_backward(&g, &tape.acts[j])?;
                    accumulate(&mut grads[node.inputs[0]], gi)?;
                }
                Op::Add => {
                    accumulate(&mut grads[node.inputs[1]], g.clone())?;
                    accumulate(&mut grads[node.inputs[0]], g)?;
                }
                Op::Concat => {
                    let sizes: Vec<usize> =
                        node.inputs.iter().map(|&i| self.nodes[i].channels).collect();
                    let parts = tensor::split_channels(&g, &sizes)?;
                    for (&i, part) in node.inputs.iter().zip(parts) {
                        accumulate(&mut grads[i], part)?;
                    }
                }
            }
        }
        let input = grads[0]
            .take()
            .unwrap_or_else(|| Tensor4::zeros(tape.acts[0].shape()));
        Ok(ModelGrads {
            params: pgrads,
            input,
        })
    }

    /// Every input offset each node can read, derived purely from the graph
    /// structure (Minkowski sums of active, dilated taps).
    pub fn receptive_offsets(&self) -> HashSet<Offset> {
        let mut sets: Vec<HashSet<Offset>> = Vec::with_capacity(self.nodes.len());
        sets.push(HashSet::from([(0, 0)]));
        for node in &self.nodes[1..] {
            let set = match node.op {
                Op::Input => unreachable!(),
                Op::Conv(p) => {
                    let params = &self.params[p];
                    let d = params.dilation as i32;
                    let taps = params.active_taps();
                    let src = &sets[node.inputs[0]];
                    let mut out = HashSet::with_capacity(src.len() * taps.len());
                    for &(a, b) in src {
                        for &(ta, tb) in &taps {
                            out.insert((a + d * ta, b + d * tb));
                        }
                    }
                    out
                }
                Op::Relu => sets[node.inputs[0]].clone(),
                Op::Add | Op::Concat => node
                    .inputs
                    .iter()
                    .flat_map(|&i| sets[i].iter().copied())
                    .collect(),
            };
            sets.push(set);
        }
        sets.swap_remove(self.output)
    }

    /// Offsets in the window the output provably never reads.
    pub fn structural_exclusion(&self, radius: i32) -> ExclusionSet {
        let reach = self.receptive_offsets();
        let full = ExclusionSet::full(radius);
        ExclusionSet::new(
            radius,
            full.offsets.into_iter().filter(|o| !reach.contains(o)).collect(),
        )
    }

    /// Checks the invariants the builders promise.
    pub fn validate(&self) -> Result<()> {
        for (j, node) in self.nodes.iter().enumerate() {
            if node.inputs.iter().any(|&i| i >= j) {
                return Err(Error::InvalidConfig(format!("node {j} is not topologically ordered")));
            }
        }
        if self.nodes[self.output].channels != self.config.in_channels {
            return Err(Error::InvalidConfig("output width differs from input width".into()));
        }
        Ok(())
    }
}
