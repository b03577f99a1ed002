//! Declarative CNN descriptions in the `INPUT -> [CONV -> AL] -> POOL -> FC -> SOFTMAX`
//! notation, their parameters, and forward/backward passes.

mod params;
mod pass;
mod text;

use std::fmt;
use std::str::FromStr;

use crate::activations::{ActivationKind, ActivationMap};
use crate::error::{Error, Result};

pub use params::{init_params, LayerParams, NetworkParams};
pub use pass::{forward, loss_and_backward, predict, softmax_rows, ForwardCache, PROB_FLOOR};

/// `(channels, height, width)` of one sample.
pub type Shape3 = [usize; 3];

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// Per-channel activation layer; must directly follow a `Conv`.
    Act(ActivationMap),
    Pool {
        window: usize,
        stride: usize,
    },
    Flatten,
    /// Fully-connected hidden layer owning a per-neuron activation map.
    Fc {
        out_neurons: usize,
        map: ActivationMap,
    },
    /// Output affine layer followed by softmax.
    SoftmaxHead {
        classes: usize,
    },
}

impl LayerSpec {
    pub fn conv(out_channels: usize, kernel: usize) -> Self {
        LayerSpec::Conv {
            out_channels,
            kernel,
            stride: 1,
            padding: 0,
        }
    }

    pub fn pool(window: usize) -> Self {
        LayerSpec::Pool { window, stride: window }
    }

    fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "CONV",
            LayerSpec::Act(_) => "AL",
            LayerSpec::Pool { .. } => "POOL",
            LayerSpec::Flatten => "FLATTEN",
            LayerSpec::Fc { .. } => "FC",
            LayerSpec::SoftmaxHead { .. } => "SOFTMAX",
        }
    }
}

/// The six CNN families, split by whether the conv activation layers and the
/// FC hidden layers use one function or several.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    ScnnSs,
    McnnSm,
    McnnMs,
    McnnMm,
    ScnnS,
    McnnM,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::ScnnSs,
        Family::McnnSm,
        Family::McnnMs,
        Family::McnnMm,
        Family::ScnnS,
        Family::McnnM,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Family::ScnnSs => "SCNN-SS",
            Family::McnnSm => "MCNN-SM",
            Family::McnnMs => "MCNN-MS",
            Family::McnnMm => "MCNN-MM",
            Family::ScnnS => "SCNN-S",
            Family::McnnM => "MCNN-M",
        }
    }

    /// The short mode code (`SS`, `SM`, ...).
    pub fn mode(self) -> &'static str {
        &self.label()[5..]
    }

    pub fn is_mcnn(self) -> bool {
        !matches!(self, Family::ScnnSs | Family::ScnnS)
    }

    pub fn has_fc(self) -> bool {
        !matches!(self, Family::ScnnS | Family::McnnM)
    }

    /// Whether the conv activation side uses several functions.
    pub fn multi_al(self) -> bool {
        matches!(self, Family::McnnMs | Family::McnnMm | Family::McnnM)
    }

    /// Whether the FC hidden side uses several functions.
    pub fn multi_fc(self) -> bool {
        matches!(self, Family::McnnSm | Family::McnnMm)
    }

    pub fn from_sides(multi_al: bool, multi_fc: Option<bool>) -> Family {
        match (multi_al, multi_fc) {
            (false, Some(false)) => Family::ScnnSs,
            (false, Some(true)) => Family::McnnSm,
            (true, Some(false)) => Family::McnnMs,
            (true, Some(true)) => Family::McnnMm,
            (false, None) => Family::ScnnS,
            (true, None) => Family::McnnM,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Accepts either the full label (`MCNN-SM`) or the mode code (`SM`).
    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Family::ALL
            .into_iter()
            .find(|f| f.label() == up || f.mode() == up)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown CNN family `{s}`")))
    }
}

/// Output shape after each layer, or a configuration error naming the first
/// offending layer (0-based index).
pub fn shape_infer(input: Shape3, layers: &[LayerSpec]) -> Result<Vec<Shape3>> {
    let fail =
        |i: usize, layer: &LayerSpec, msg: String| Error::config_field(format!("layer {i} ({})", layer.name()), msg);
    if input.contains(&0) {
        return Err(Error::config_field(
            "input",
            format!("input shape {input:?} has a zero dimension"),
        ));
    }
    let mut shapes = Vec::with_capacity(layers.len());
    let mut cur = input;
    let mut flat = false;
    for (i, layer) in layers.iter().enumerate() {
        let [c, h, w] = cur;
        cur = match layer {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                if flat {
                    return Err(fail(i, layer, "convolution after flatten".into()));
                }
                if *out_channels == 0 || *kernel == 0 || *stride == 0 {
                    return Err(fail(i, layer, "channels, kernel and stride must be positive".into()));
                }
                let (ph, pw) = (h + 2 * padding, w + 2 * padding);
                if *kernel > ph || *kernel > pw || (ph - kernel) % stride != 0 || (pw - kernel) % stride != 0 {
                    return Err(fail(
                        i,
                        layer,
                        format!("kernel {kernel} stride {stride} padding {padding} does not tile {h}x{w}"),
                    ));
                }
                [*out_channels, (ph - kernel) / stride + 1, (pw - kernel) / stride + 1]
            }
            LayerSpec::Act(map) => {
                if !matches!(i.checked_sub(1).map(|p| &layers[p]), Some(LayerSpec::Conv { .. })) {
                    return Err(fail(
                        i,
                        layer,
                        "activation layer must directly follow a convolution".into(),
                    ));
                }
                if map.len() != c {
                    return Err(fail(
                        i,
                        layer,
                        format!("map has {} slots, expected {c} channels", map.len()),
                    ));
                }
                cur
            }
            LayerSpec::Pool { window, stride } => {
                if flat {
                    return Err(fail(i, layer, "pooling after flatten".into()));
                }
                if *window == 0
                    || *stride == 0
                    || *window > h
                    || *window > w
                    || (h - window) % stride != 0
                    || (w - window) % stride != 0
                {
                    return Err(fail(
                        i,
                        layer,
                        format!("window {window} stride {stride} does not tile {h}x{w}"),
                    ));
                }
                [c, (h - window) / stride + 1, (w - window) / stride + 1]
            }
            LayerSpec::Flatten => {
                if flat {
                    return Err(fail(i, layer, "input is already flat".into()));
                }
                flat = true;
                [c * h * w, 1, 1]
            }
            LayerSpec::Fc { out_neurons, map } => {
                if !flat {
                    return Err(fail(i, layer, "fully-connected layer needs a flattened input".into()));
                }
                if *out_neurons == 0 {
                    return Err(fail(i, layer, "layer needs at least one neuron".into()));
                }
                if map.len() != *out_neurons {
                    return Err(fail(
                        i,
                        layer,
                        format!("map has {} slots, expected {out_neurons} neurons", map.len()),
                    ));
                }
                [*out_neurons, 1, 1]
            }
            LayerSpec::SoftmaxHead { classes } => {
                if i + 1 != layers.len() {
                    return Err(fail(i, layer, "softmax head must be the last layer".into()));
                }
                if !flat {
                    return Err(fail(i, layer, "softmax head needs a flattened input".into()));
                }
                if *classes == 0 {
                    return Err(fail(i, layer, "softmax head needs at least one class".into()));
                }
                [*classes, 1, 1]
            }
        };
        shapes.push(cur);
    }
    match layers.last() {
        Some(LayerSpec::SoftmaxHead { .. }) => Ok(shapes),
        _ => Err(Error::config_field(
            format!("layer {}", layers.len()),
            "network must end with a softmax head",
        )),
    }
}

/// A validated network description. Construction runs shape inference, so a
/// `NetworkSpec` always chains consistently from input to head.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NetworkSpec {
    input_shape: Shape3,
    layers: Vec<LayerSpec>,
    seed: u64,
}

impl NetworkSpec {
    pub fn new(input_shape: Shape3, layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        shape_infer(input_shape, &layers)?;
        Ok(NetworkSpec {
            input_shape,
            layers,
            seed,
        })
    }

    pub fn input_shape(&self) -> Shape3 {
        self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn shapes(&self) -> Vec<Shape3> {
        shape_infer(self.input_shape, &self.layers).expect("validated at construction")
    }

    pub fn classes(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::SoftmaxHead { classes }) => *classes,
            _ => unreachable!("validated at construction"),
        }
    }

    /// Conv activation maps in order.
    pub fn al_maps(&self) -> impl Iterator<Item = &ActivationMap> {
        self.layers.iter().filter_map(|l| match l {
            LayerSpec::Act(m) => Some(m),
            _ => None,
        })
    }

    /// FC hidden-layer maps in order.
    pub fn fc_maps(&self) -> impl Iterator<Item = &ActivationMap> {
        self.layers.iter().filter_map(|l| match l {
            LayerSpec::Fc { map, .. } => Some(map),
            _ => None,
        })
    }

    /// Replaces the activation maps, keeping the topology.
    pub fn with_maps(&self, al: &[ActivationMap], fc: &[ActivationMap]) -> Result<Self> {
        let (mut ai, mut fi) = (al.iter(), fc.iter());
        let mut layers = self.layers.clone();
        for layer in &mut layers {
            match layer {
                LayerSpec::Act(m) => {
                    *m = ai.next().ok_or_else(|| Error::config("too few AL maps"))?.clone();
                }
                LayerSpec::Fc { map, .. } => {
                    *map = fi.next().ok_or_else(|| Error::config("too few FC maps"))?.clone();
                }
                _ => {}
            }
        }
        if ai.next().is_some() || fi.next().is_some() {
            return Err(Error::config("more maps than activation layers"));
        }
        NetworkSpec::new(self.input_shape, layers, self.seed)
    }

    /// True when every slot of every map is LIN, which makes the whole network affine.
    pub fn is_all_linear(&self) -> bool {
        self.al_maps()
            .chain(self.fc_maps())
            .flat_map(|m| m.slots())
            .all(|&k| k == ActivationKind::Lin)
    }

    pub fn family(&self) -> Family {
        classify_family(self)
    }

    /// One label per activation layer and per FC hidden layer: the code when the
    /// layer is uniform, else its distinct codes joined by `/`.
    pub fn layer_labels(&self) -> (Vec<String>, Vec<String>) {
        let label = |m: &ActivationMap| m.distinct().iter().map(|k| k.to_string()).collect::<Vec<_>>().join("/");
        (self.al_maps().map(label).collect(), self.fc_maps().map(label).collect())
    }

    /// Layer labels joined with `-`, e.g. `REL-LIN-REL-LIN-REL`.
    pub fn descriptor(&self) -> String {
        let (al, fc) = self.layer_labels();
        al.into_iter().chain(fc).collect::<Vec<_>>().join("-")
    }
}

fn single_function<'a>(maps: impl Iterator<Item = &'a ActivationMap>) -> bool {
    let mut first = None;
    for k in maps.flat_map(|m| m.slots()) {
        match first {
            None => first = Some(*k),
            Some(f) if f != *k => return false,
            _ => {}
        }
    }
    true
}

/// Family label from the uniformity pattern of the activation maps. A spec
/// with no FC hidden layers falls in the conv-only families.
pub fn classify_family(spec: &NetworkSpec) -> Family {
    let multi_al = !single_function(spec.al_maps());
    let multi_fc = (spec.fc_maps().next().is_some()).then(|| !single_function(spec.fc_maps()));
    Family::from_sides(multi_al, multi_fc)
}
