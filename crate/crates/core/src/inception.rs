//! Multi-branch blocks built from convolutional paths.
//!
//! A path is a chain of max-pooling stages and convolution blocks (CB = conv
//! followed by an activation layer). Path outputs are concatenated along
//! channels. Each path carries one activation function for all of its CBs,
//! or optionally one per CB.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activations::{apply_map_backward, apply_map_forward, ActivationKind, ActivationMap, Granularity};
use crate::error::{Error, Result};
use crate::network::Shape3;
use crate::tensor::{
    conv2d_backward, conv2d_forward, maxpool_backward, maxpool_forward_padded, FilterBank, GradPair, PoolIndices,
    Tensor,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    MaxPool {
        window: usize,
        stride: usize,
        padding: usize,
    },
    Cb {
        kernel: usize,
        out_channels: usize,
        stride: usize,
        padding: usize,
    },
}

impl Stage {
    /// Square CB with stride 1 and size-preserving padding.
    pub fn cb(kernel: usize, out_channels: usize) -> Stage {
        Stage::Cb {
            kernel,
            out_channels,
            stride: 1,
            padding: kernel.saturating_sub(1) / 2,
        }
    }

    /// Size-preserving max pooling with stride 1.
    pub fn same_pool(window: usize) -> Stage {
        Stage::MaxPool {
            window,
            stride: 1,
            padding: window.saturating_sub(1) / 2,
        }
    }

    fn is_cb(&self) -> bool {
        matches!(self, Stage::Cb { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvPath {
    stages: Vec<Stage>,
    kinds: Vec<ActivationKind>,
}

impl ConvPath {
    /// All CBs on the path share `kind`.
    pub fn new(stages: Vec<Stage>, kind: ActivationKind) -> Result<Self> {
        let cbs = stages.iter().filter(|s| s.is_cb()).count();
        Self::with_cb_kinds(stages, vec![kind; cbs])
    }

    /// One activation function per CB, in path order.
    pub fn with_cb_kinds(stages: Vec<Stage>, kinds: Vec<ActivationKind>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::config("convolutional path has no stages"));
        }
        let cbs = stages.iter().filter(|s| s.is_cb()).count();
        if kinds.len() != cbs {
            return Err(Error::config(format!(
                "path has {cbs} CBs but {} activation functions",
                kinds.len()
            )));
        }
        for s in &stages {
            let bad = match *s {
                Stage::MaxPool {
                    window,
                    stride,
                    padding,
                } => window == 0 || stride == 0 || padding >= window,
                Stage::Cb {
                    kernel,
                    out_channels,
                    stride,
                    ..
                } => kernel == 0 || out_channels == 0 || stride == 0,
            };
            if bad {
                return Err(Error::config(format!("invalid path stage {s:?}")));
            }
        }
        Ok(ConvPath { stages, kinds })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn cb_kinds(&self) -> &[ActivationKind] {
        &self.kinds
    }

    /// The shared function, if every CB on the path uses the same one.
    pub fn kind(&self) -> Option<ActivationKind> {
        match self.kinds.split_first() {
            Some((first, rest)) if rest.iter().all(|k| k == first) => Some(*first),
            _ => None,
        }
    }

    /// Output channels given the block input channels.
    pub fn out_channels(&self, in_channels: usize) -> usize {
        self.stages.iter().fold(in_channels, |c, s| match s {
            Stage::Cb { out_channels, .. } => *out_channels,
            Stage::MaxPool { .. } => c,
        })
    }

    fn label(&self) -> String {
        let mut kinds = self.kinds.iter();
        self.stages
            .iter()
            .map(|s| match s {
                Stage::MaxPool { .. } => "Max Pooling".to_string(),
                Stage::Cb { kernel, .. } => {
                    format!("{kernel}×{kernel} CB({})", kinds.next().expect("kind per CB"))
                }
            })
            .collect::<Vec<_>>()
            .join(" → ")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InceptionBlock {
    in_channels: usize,
    scale: f64,
    paths: Vec<ConvPath>,
}

/// Inception-A paths at scale 1: `(leading 3x3 max pool, [(kernel, width)])`.
const INCEPTION_A: [(bool, &[(usize, usize)]); 4] = [
    (true, &[(1, 96)]),
    (false, &[(1, 96)]),
    (false, &[(1, 64), (3, 96)]),
    (false, &[(1, 64), (3, 96), (3, 96)]),
];

fn scaled(width: usize, scale: f64) -> Result<usize> {
    let w = (width as f64 * scale).round();
    if w < 1.0 {
        return Err(Error::config_field(
            "scale",
            format!("scale {scale} reduces a {width}-channel CB to zero channels"),
        ));
    }
    Ok(w as usize)
}

fn check_scale(scale: f64) -> Result<()> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(Error::config_field(
            "scale",
            format!("scale must be positive, got {scale}"),
        ))
    }
}

/// Four-path Inception-A block. `kinds[i]` is the activation function of path `i + 1`.
pub fn build_inception_a(in_channels: usize, scale: f64, kinds: &[ActivationKind]) -> Result<InceptionBlock> {
    if kinds.len() != INCEPTION_A.len() {
        return Err(Error::config(format!(
            "Inception-A has 4 paths, got {} activation functions",
            kinds.len()
        )));
    }
    let layout: Vec<Vec<Stage>> = INCEPTION_A
        .iter()
        .map(|(pool, cbs)| {
            let mut stages = Vec::new();
            if *pool {
                stages.push(Stage::same_pool(3));
            }
            stages.extend(cbs.iter().map(|&(k, w)| Stage::cb(k, w)));
            stages
        })
        .collect();
    InceptionBlock::from_layout(in_channels, scale, &layout, kinds)
}

impl InceptionBlock {
    /// Block from explicit paths; channel widths are used as given.
    pub fn from_paths(in_channels: usize, paths: Vec<ConvPath>) -> Result<Self> {
        if in_channels == 0 {
            return Err(Error::config("block input needs at least one channel"));
        }
        if paths.is_empty() {
            return Err(Error::config("block has no paths"));
        }
        Ok(InceptionBlock {
            in_channels,
            scale: 1.0,
            paths,
        })
    }

    /// Block from a stage layout whose CB widths are multiplied by `scale`;
    /// path `i` uses `kinds[i]` for all of its CBs.
    pub fn from_layout(
        in_channels: usize,
        scale: f64,
        layout: &[Vec<Stage>],
        kinds: &[ActivationKind],
    ) -> Result<Self> {
        check_scale(scale)?;
        if kinds.len() != layout.len() {
            return Err(Error::config(format!(
                "layout has {} paths, got {} activation functions",
                layout.len(),
                kinds.len()
            )));
        }
        let paths = layout
            .iter()
            .zip(kinds)
            .map(|(stages, &kind)| {
                let stages = stages
                    .iter()
                    .map(|s| match *s {
                        Stage::Cb {
                            kernel,
                            out_channels,
                            stride,
                            padding,
                        } => Ok(Stage::Cb {
                            kernel,
                            out_channels: scaled(out_channels, scale)?,
                            stride,
                            padding,
                        }),
                        pool => Ok(pool),
                    })
                    .collect::<Result<Vec<_>>>()?;
                ConvPath::new(stages, kind)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut block = Self::from_paths(in_channels, paths)?;
        block.scale = scale;
        Ok(block)
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn paths(&self) -> &[ConvPath] {
        &self.paths
    }

    pub fn path_channels(&self) -> Vec<usize> {
        self.paths.iter().map(|p| p.out_channels(self.in_channels)).collect()
    }

    pub fn out_channels(&self) -> usize {
        self.path_channels().iter().sum()
    }

    /// Same topology with one activation function per path.
    pub fn with_path_kinds(&self, kinds: &[ActivationKind]) -> Result<Self> {
        if kinds.len() != self.paths.len() {
            return Err(Error::config(format!(
                "block has {} paths, got {} activation functions",
                self.paths.len(),
                kinds.len()
            )));
        }
        let paths = self
            .paths
            .iter()
            .zip(kinds)
            .map(|(p, &k)| ConvPath::new(p.stages.clone(), k))
            .collect::<Result<_>>()?;
        Ok(InceptionBlock { paths, ..self.clone() })
    }

    /// Output shape for a `[c, h, w]` input; every path must agree spatially.
    pub fn output_shape(&self, input: Shape3) -> Result<Shape3> {
        if input[0] != self.in_channels {
            return Err(Error::dim("inception block input", self.in_channels, input[0]));
        }
        let mut spatial: Option<(usize, usize)> = None;
        for (i, path) in self.paths.iter().enumerate() {
            let (mut h, mut w) = (input[1], input[2]);
            for s in &path.stages {
                let (k, stride, pad) = match *s {
                    Stage::MaxPool {
                        window,
                        stride,
                        padding,
                    } => (window, stride, padding),
                    Stage::Cb {
                        kernel,
                        stride,
                        padding,
                        ..
                    } => (kernel, stride, padding),
                };
                let step = |n: usize| {
                    let padded = n + 2 * pad;
                    (padded >= k && (padded - k).is_multiple_of(stride)).then(|| (padded - k) / stride + 1)
                };
                match (step(h), step(w)) {
                    (Some(nh), Some(nw)) => (h, w) = (nh, nw),
                    _ => {
                        return Err(Error::config(format!(
                            "path {} stage {s:?} does not tile a {h}x{w} input",
                            i + 1
                        )))
                    }
                }
            }
            match spatial {
                None => spatial = Some((h, w)),
                Some(prev) if prev != (h, w) => {
                    return Err(Error::config(format!(
                        "path {} produces {h}x{w} but path 1 produces {}x{}",
                        i + 1,
                        prev.0,
                        prev.1
                    )))
                }
                _ => {}
            }
        }
        let (h, w) = spatial.expect("at least one path");
        Ok([self.out_channels(), h, w])
    }

    /// Per-path widths and the concatenated output shape.
    pub fn shape_report(&self, input: Shape3) -> Result<String> {
        let out = self.output_shape(input)?;
        let mut s = String::new();
        let _ = writeln!(s, "input {}x{}x{}, scale {}", input[0], input[1], input[2], self.scale);
        for (i, c) in self.path_channels().iter().enumerate() {
            let _ = writeln!(s, "  path {}: {c} channels", i + 1);
        }
        let _ = writeln!(s, "output {}x{}x{}", out[0], out[1], out[2]);
        Ok(s)
    }
}

impl fmt::Display for InceptionBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Previous Layer")?;
        for (i, p) in self.paths.iter().enumerate() {
            writeln!(f, "  Path {}: {}", i + 1, p.label())?;
        }
        write!(f, "Filter Concat")
    }
}

/// Filter banks for every CB, indexed `[path][stage]`; pooling stages hold `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams {
    pub paths: Vec<Vec<Option<FilterBank>>>,
}

impl BlockParams {
    pub fn zeros_like(block: &InceptionBlock) -> Self {
        let paths = block
            .paths
            .iter()
            .map(|p| {
                let mut c = block.in_channels;
                p.stages
                    .iter()
                    .map(|s| match *s {
                        Stage::Cb {
                            kernel, out_channels, ..
                        } => {
                            let bank = FilterBank::zeros(out_channels, c, kernel);
                            c = out_channels;
                            Some(bank)
                        }
                        Stage::MaxPool { .. } => None,
                    })
                    .collect()
            })
            .collect();
        BlockParams { paths }
    }

    pub fn banks(&self) -> impl Iterator<Item = &FilterBank> {
        self.paths.iter().flatten().flatten()
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.banks().flat_map(|b| [b.weights().data(), b.biases()]).collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for bank in self.paths.iter_mut().flatten().flatten() {
            let (w, b) = bank.split_mut();
            out.push(w);
            out.push(b);
        }
        out
    }
}

/// Uniform weights scaled by fan-in, doubled variance before REL/ELU. Biases start at zero.
pub fn init_block_params(block: &InceptionBlock, seed: u64) -> BlockParams {
    let mut params = BlockParams::zeros_like(block);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (path, banks) in block.paths.iter().zip(&mut params.paths) {
        let mut kinds = path.kinds.iter();
        for bank in banks.iter_mut().flatten() {
            let kind = kinds.next().expect("kind per CB");
            let gain = if kind.is_rectifier_like() { 2.0 } else { 1.0 };
            let fan_in = (bank.in_channels() * bank.kernel() * bank.kernel()) as f64;
            let bound = (3.0 * gain / fan_in).sqrt();
            for w in bank.weights_mut().data_mut() {
                *w = rng.gen_range(-bound..bound);
            }
        }
    }
    params
}

enum StageCache {
    Pool(PoolIndices),
    Cb {
        input: Tensor,
        pre: Tensor,
        map: ActivationMap,
    },
}

fn check_params(block: &InceptionBlock, params: &BlockParams) -> Result<()> {
    let reference = BlockParams::zeros_like(block);
    let same = reference.paths.len() == params.paths.len()
        && reference.paths.iter().zip(&params.paths).all(|(a, b)| {
            a.len() == b.len()
                && a.iter().zip(b).all(|(x, y)| match (x, y) {
                    (None, None) => true,
                    (Some(x), Some(y)) => x.weights().shape() == y.weights().shape(),
                    _ => false,
                })
        });
    if same {
        Ok(())
    } else {
        Err(Error::dim(
            "inception block",
            "block parameter layout",
            "supplied parameters",
        ))
    }
}

fn path_forward(path: &ConvPath, banks: &[Option<FilterBank>], input: &Tensor) -> Result<(Tensor, Vec<StageCache>)> {
    let mut x = input.clone();
    let mut caches = Vec::with_capacity(path.stages.len());
    let mut kinds = path.kinds.iter();
    for (stage, bank) in path.stages.iter().zip(banks) {
        match (*stage, bank) {
            (
                Stage::MaxPool {
                    window,
                    stride,
                    padding,
                },
                None,
            ) => {
                let (y, idx) = maxpool_forward_padded(&x, window, stride, padding)?;
                caches.push(StageCache::Pool(idx));
                x = y;
            }
            (Stage::Cb { stride, padding, .. }, Some(bank)) => {
                let pre = conv2d_forward(&x, bank, stride, padding)?;
                let kind = *kinds.next().expect("kind per CB");
                let map = ActivationMap::uniform(kind, pre.channels())?;
                let y = apply_map_forward(&pre, &map, Granularity::PerChannel)?;
                caches.push(StageCache::Cb { input: x, pre, map });
                x = y;
            }
            _ => return Err(Error::Internal("block parameters do not match path stages".into())),
        }
    }
    Ok((x, caches))
}

fn forward_paths(
    block: &InceptionBlock,
    params: &BlockParams,
    input: &Tensor,
) -> Result<(Vec<Tensor>, Vec<Vec<StageCache>>)> {
    if input.channels() != block.in_channels {
        return Err(Error::dim("inception block input", block.in_channels, input.channels()));
    }
    check_params(block, params)?;
    let mut outs = Vec::with_capacity(block.paths.len());
    let mut caches = Vec::with_capacity(block.paths.len());
    for (path, banks) in block.paths.iter().zip(&params.paths) {
        let (y, c) = path_forward(path, banks, input)?;
        if let Some(first) = outs.first() {
            let first: &Tensor = first;
            if (first.height(), first.width()) != (y.height(), y.width()) {
                return Err(Error::Internal(format!(
                    "path outputs disagree spatially: {:?} vs {:?}",
                    first.shape(),
                    y.shape()
                )));
            }
        }
        outs.push(y);
        caches.push(c);
    }
    Ok((outs, caches))
}

/// Runs every path and concatenates their outputs along channels.
pub fn block_forward(block: &InceptionBlock, params: &BlockParams, input: &Tensor) -> Result<Tensor> {
    let (outs, _) = forward_paths(block, params, input)?;
    Tensor::concat_channels(&outs)
}

/// Gradients for the block input (summed over paths) and for every filter bank.
pub fn block_backward(
    block: &InceptionBlock,
    params: &BlockParams,
    input: &Tensor,
    upstream: &Tensor,
) -> Result<GradPair<BlockParams>> {
    let (outs, caches) = forward_paths(block, params, input)?;
    let widths: Vec<usize> = outs.iter().map(Tensor::channels).collect();
    let expected = Tensor::concat_channels(&outs)?.shape();
    if upstream.shape() != expected {
        return Err(Error::dim("block_backward", expected, upstream.shape()));
    }
    let pieces = upstream.split_channels(&widths)?;
    let mut grads = BlockParams::zeros_like(block);
    let mut grad_input = Tensor::zeros(input.shape());
    for ((path, (banks, grad_banks)), (mut g, cache)) in block
        .paths
        .iter()
        .zip(params.paths.iter().zip(&mut grads.paths))
        .zip(pieces.into_iter().zip(caches))
    {
        for ((stage, bank), (grad_bank, c)) in path
            .stages
            .iter()
            .zip(banks)
            .zip(grad_banks.iter_mut().zip(cache))
            .rev()
        {
            match (stage, bank, c) {
                (Stage::MaxPool { .. }, None, StageCache::Pool(idx)) => {
                    g = maxpool_backward(&idx, &g)?;
                }
                (&Stage::Cb { stride, padding, .. }, Some(bank), StageCache::Cb { input, pre, map }) => {
                    let dz = apply_map_backward(&pre, &map, &g, Granularity::PerChannel)?;
                    let pair = conv2d_backward(&input, bank, &dz, stride, padding)?;
                    *grad_bank = Some(pair.params);
                    g = pair.input;
                }
                _ => return Err(Error::Internal("stage cache mismatch".into())),
            }
        }
        grad_input.add_assign(&g)?;
    }
    Ok(GradPair {
        input: grad_input,
        params: grads,
    })
}

/// Number of paths in each block of a network, in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathLayout {
    pub blocks: Vec<usize>,
}

impl PathLayout {
    pub fn single(paths: usize) -> Self {
        PathLayout { blocks: vec![paths] }
    }

    pub fn of_blocks(blocks: &[InceptionBlock]) -> Self {
        PathLayout {
            blocks: blocks.iter().map(|b| b.paths.len()).collect(),
        }
    }

    pub fn total(&self) -> usize {
        self.blocks.iter().sum()
    }
}

/// One 1-based pool index per path over the whole network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathAssignment {
    codes: Vec<usize>,
}

impl PathAssignment {
    pub fn new(codes: Vec<usize>, pool_size: usize) -> Result<Self> {
        if let Some(i) = codes.iter().position(|&c| c == 0 || c > pool_size) {
            return Err(Error::Parse {
                position: i + 1,
                message: format!("code {} outside 1..={pool_size}", codes[i]),
            });
        }
        Ok(PathAssignment { codes })
    }

    pub fn codes(&self) -> &[usize] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn kinds(&self, pool: &[ActivationKind]) -> Result<Vec<ActivationKind>> {
        self.codes
            .iter()
            .map(|&c| {
                pool.get(c.wrapping_sub(1))
                    .copied()
                    .ok_or_else(|| Error::config(format!("code {c} outside a pool of {}", pool.len())))
            })
            .collect()
    }

    /// Applies consecutive slices of the assignment to consecutive blocks.
    pub fn apply(&self, blocks: &[InceptionBlock], pool: &[ActivationKind]) -> Result<Vec<InceptionBlock>> {
        let layout = PathLayout::of_blocks(blocks);
        if layout.total() != self.codes.len() {
            return Err(Error::config(format!(
                "assignment has {} entries but the blocks have {} paths",
                self.codes.len(),
                layout.total()
            )));
        }
        let kinds = self.kinds(pool)?;
        let mut offset = 0;
        blocks
            .iter()
            .map(|b| {
                let n = b.paths.len();
                let out = b.with_path_kinds(&kinds[offset..offset + n]);
                offset += n;
                out
            })
            .collect()
    }
}

/// I.i.d. uniform path codes. With `multi`, vectors using a single code are redrawn.
pub fn assign_paths(layout: &PathLayout, pool: &[ActivationKind], seed: u64, multi: bool) -> Result<PathAssignment> {
    let n = layout.total();
    if pool.is_empty() {
        return Err(Error::config_field("pool", "function pool is empty"));
    }
    if multi && (pool.len() < 2 || n < 2) {
        return Err(Error::config_field(
            "pool",
            "a multi-function assignment needs at least two functions and two paths",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let codes: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=pool.len())).collect();
        if !multi || codes.windows(2).any(|w| w[0] != w[1]) {
            return PathAssignment::new(codes, pool.len());
        }
    }
}

/// `"1, 2, 3"` or `"(1, 2, 3)"`; positions in errors are 1-based entry indices.
pub fn parse_assignment(text: &str, pool_size: usize) -> Result<PathAssignment> {
    let t = text.trim();
    let t = t.strip_prefix('(').and_then(|s| s.strip_suffix(')')).unwrap_or(t);
    let codes = t
        .split(',')
        .enumerate()
        .map(|(i, s)| {
            s.trim().parse::<usize>().map_err(|_| Error::Parse {
                position: i + 1,
                message: format!("expected a path code, got `{}`", s.trim()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PathAssignment::new(codes, pool_size)
}

pub fn print_assignment(assignment: &PathAssignment) -> String {
    let body: Vec<String> = assignment.codes.iter().map(|c| c.to_string()).collect();
    format!("({})", body.join(", "))
}

impl fmt::Display for PathAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_assignment(self))
    }
}

/// Parses a path layout, one path per line:
///
/// ```text
/// # comment
/// POOL(3) -> CB(1,96)
/// CB(1,64) -> CB(3,96)
/// ```
///
/// `CB(kernel, out[, stride[, padding]])` defaults to stride 1 and
/// size-preserving padding; `POOL(window[, stride[, padding]])` likewise.
/// Parse positions are 1-based line numbers.
pub fn parse_path_layout(text: &str) -> Result<Vec<Vec<Stage>>> {
    let mut paths = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let position = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { position, message };
        let mut stages = Vec::new();
        for seg in line.split("->").map(str::trim) {
            let (name, args) = seg
                .split_once('(')
                .and_then(|(n, a)| a.strip_suffix(')').map(|a| (n.trim().to_ascii_uppercase(), a)))
                .ok_or_else(|| err(format!("expected NAME(args), got `{seg}`")))?;
            let vals = args
                .split(',')
                .map(|a| a.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| err(format!("bad arguments in `{seg}`")))?;
            let stage = match (name.as_str(), vals.as_slice()) {
                ("POOL", [w]) => Stage::same_pool(*w),
                ("POOL", [w, s]) => Stage::MaxPool {
                    window: *w,
                    stride: *s,
                    padding: if *s == 1 { w.saturating_sub(1) / 2 } else { 0 },
                },
                ("POOL", [w, s, p]) => Stage::MaxPool {
                    window: *w,
                    stride: *s,
                    padding: *p,
                },
                ("CB", [k, c]) => Stage::cb(*k, *c),
                ("CB", [k, c, s]) => Stage::Cb {
                    kernel: *k,
                    out_channels: *c,
                    stride: *s,
                    padding: if *s == 1 { k.saturating_sub(1) / 2 } else { 0 },
                },
                ("CB", [k, c, s, p]) => Stage::Cb {
                    kernel: *k,
                    out_channels: *c,
                    stride: *s,
                    padding: *p,
                },
                _ => return Err(err(format!("unknown stage `{seg}`"))),
            };
            stages.push(stage);
        }
        paths.push(stages);
    }
    if paths.is_empty() {
        return Err(Error::Parse {
            position: 1,
            message: "layout has no paths".into(),
        });
    }
    Ok(paths)
}
