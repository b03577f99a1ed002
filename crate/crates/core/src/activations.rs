//! The seven activation functions and per-channel / per-neuron activation maps.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// ELU's negative-branch scale. Always finite and strictly positive.
#[derive(Clone, Copy, Debug)]
pub struct EluAlpha(f64);

impl EluAlpha {
    pub const ONE: EluAlpha = EluAlpha(1.0);

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 {
            Ok(EluAlpha(alpha))
        } else {
            Err(Error::InvalidArgument(format!(
                "ELU alpha must be positive and finite, got {alpha}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl PartialEq for EluAlpha {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for EluAlpha {}

impl Hash for EluAlpha {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl PartialOrd for EluAlpha {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EluAlpha {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActivationKind {
    /// Linear: `x`.
    Lin,
    /// Rectifier: `max(0, x)`.
    Rel,
    /// Logistic sigmoid.
    Sig,
    /// Hyperbolic tangent.
    Tan,
    /// Softplus: `ln(1 + e^x)`.
    Pls,
    /// Softsign: `x / (1 + |x|)`.
    Sgn,
    /// Exponential linear unit: `x` for `x > 0`, else `alpha (e^x - 1)`.
    Elu(EluAlpha),
}

impl ActivationKind {
    pub const ELU: ActivationKind = ActivationKind::Elu(EluAlpha::ONE);

    /// All seven kinds in canonical order (ELU with alpha 1).
    pub const ALL: [ActivationKind; 7] = [
        ActivationKind::Lin,
        ActivationKind::Rel,
        ActivationKind::Sig,
        ActivationKind::Tan,
        ActivationKind::Pls,
        ActivationKind::Sgn,
        ActivationKind::ELU,
    ];

    /// The three-letter code.
    pub fn code(self) -> &'static str {
        match self {
            ActivationKind::Lin => "LIN",
            ActivationKind::Rel => "REL",
            ActivationKind::Sig => "SIG",
            ActivationKind::Tan => "TAN",
            ActivationKind::Pls => "PLS",
            ActivationKind::Sgn => "SGN",
            ActivationKind::Elu(_) => "ELU",
        }
    }

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            ActivationKind::Lin => x,
            ActivationKind::Rel => x.max(0.0),
            ActivationKind::Sig => sigmoid(x),
            ActivationKind::Tan => x.tanh(),
            // max(x, 0) + ln(1 + e^-|x|) does not overflow for large |x|.
            ActivationKind::Pls => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            ActivationKind::Sgn => x / (1.0 + x.abs()),
            ActivationKind::Elu(a) => {
                if x > 0.0 {
                    x
                } else {
                    a.0 * x.exp_m1()
                }
            }
        }
    }

    /// Derivative of [`ActivationKind::eval`]. At kinks: REL'(0) = 0 and ELU'(0) = alpha.
    #[inline]
    pub fn grad(self, x: f64) -> f64 {
        match self {
            ActivationKind::Lin => 1.0,
            ActivationKind::Rel => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sig => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            ActivationKind::Tan => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Pls => sigmoid(x),
            ActivationKind::Sgn => {
                let d = 1.0 + x.abs();
                1.0 / (d * d)
            }
            ActivationKind::Elu(a) => {
                if x > 0.0 {
                    1.0
                } else {
                    a.0 * x.exp()
                }
            }
        }
    }

    /// Whether He-style (2/fan_in) initialization suits this kind.
    pub(crate) fn is_rectifier_like(self) -> bool {
        matches!(self, ActivationKind::Rel | ActivationKind::Elu(_))
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::Elu(a) if *a != EluAlpha::ONE => write!(f, "ELU({})", a.0),
            other => f.write_str(other.code()),
        }
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    /// Case-insensitive three-letter code; ELU optionally carries its alpha as `ELU(0.5)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let upper = s.to_ascii_uppercase();
        let kind = match upper.as_str() {
            "LIN" => ActivationKind::Lin,
            "REL" => ActivationKind::Rel,
            "SIG" => ActivationKind::Sig,
            "TAN" => ActivationKind::Tan,
            "PLS" => ActivationKind::Pls,
            "SGN" => ActivationKind::Sgn,
            "ELU" => ActivationKind::ELU,
            _ => {
                let alpha = upper
                    .strip_prefix("ELU(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown activation code `{s}`")))?;
                let alpha: f64 = alpha
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad ELU alpha in `{s}`")))?;
                ActivationKind::Elu(EluAlpha::new(alpha)?)
            }
        };
        Ok(kind)
    }
}

/// One activation kind per channel (conv activation layer) or per neuron (FC layer).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActivationMap {
    slots: Vec<ActivationKind>,
}

impl ActivationMap {
    pub fn new(slots: Vec<ActivationKind>) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::config("activation map must have at least one slot"));
        }
        Ok(ActivationMap { slots })
    }

    pub fn uniform(kind: ActivationKind, len: usize) -> Result<Self> {
        ActivationMap::new(vec![kind; len])
    }

    pub fn slots(&self) -> &[ActivationKind] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.slots.windows(2).all(|w| w[0] == w[1])
    }

    /// Distinct kinds in order of first appearance.
    pub fn distinct(&self) -> Vec<ActivationKind> {
        let mut out: Vec<ActivationKind> = Vec::new();
        for &k in &self.slots {
            if !out.contains(&k) {
                out.push(k);
            }
        }
        out
    }

    /// Kind shared by the majority of slots for initialization purposes.
    pub(crate) fn rectifier_majority(&self) -> bool {
        let rect = self.slots.iter().filter(|k| k.is_rectifier_like()).count();
        2 * rect > self.slots.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Granularity {
    /// Slot `i` applies to every element of channel `i`.
    PerChannel,
    /// Slot `i` applies to feature `i` of a `(batch, features)` view.
    PerNeuron,
}

fn check_slots(input: &Tensor, map: &ActivationMap, granularity: Granularity) -> Result<()> {
    if granularity == Granularity::PerNeuron && !input.is_flat() {
        return Err(Error::dim(
            "activation (per-neuron)",
            input.shape(),
            "a (batch, features) view",
        ));
    }
    if map.len() != input.channels() {
        let unit = match granularity {
            Granularity::PerChannel => "channels",
            Granularity::PerNeuron => "neurons",
        };
        return Err(Error::config(format!(
            "activation map has {} slots but the layer has {} {unit}",
            map.len(),
            input.channels()
        )));
    }
    Ok(())
}

pub fn apply_map_forward(input: &Tensor, map: &ActivationMap, granularity: Granularity) -> Result<Tensor> {
    check_slots(input, map, granularity)?;
    let mut out = input.clone();
    let plane = input.height() * input.width();
    for item in out.data_mut().chunks_mut(map.len() * plane) {
        for (chan, &kind) in item.chunks_mut(plane).zip(map.slots()) {
            for v in chan {
                *v = kind.eval(*v);
            }
        }
    }
    Ok(out)
}

/// `upstream * f'(input)` with the same slot routing as the forward pass.
pub fn apply_map_backward(
    input: &Tensor,
    map: &ActivationMap,
    upstream: &Tensor,
    granularity: Granularity,
) -> Result<Tensor> {
    check_slots(input, map, granularity)?;
    if upstream.shape() != input.shape() {
        return Err(Error::dim("activation backward", input.shape(), upstream.shape()));
    }
    let mut out = upstream.clone();
    let plane = input.height() * input.width();
    let stride = map.len() * plane;
    for (g_item, x_item) in out.data_mut().chunks_mut(stride).zip(input.data().chunks(stride)) {
        for ((g_chan, x_chan), &kind) in g_item.chunks_mut(plane).zip(x_item.chunks(plane)).zip(map.slots()) {
            for (g, &x) in g_chan.iter_mut().zip(x_chan) {
                *g *= kind.grad(x);
            }
        }
    }
    Ok(out)
}
