//! Counting, sampling, and enumerating activation assignments.
//!
//! With `j` functions available to `m` conv-activation units and `k` functions
//! available to `n` FC hidden units:
//!
//! | family  | count                 |
//! |---------|-----------------------|
//! | SCNN-SS | `j k`                 |
//! | MCNN-SM | `j (k^n - k)`         |
//! | MCNN-MS | `(j^m - j) k`         |
//! | MCNN-MM | `(j^m - j)(k^n - k)`  |
//! | SCNN-S  | `j`                   |
//! | MCNN-M  | `j^m - j`             |
//!
//! "Multi-function" sides are sampled by drawing every unit i.i.d. uniformly
//! from the pool and rejecting draws where all units agree, which is exactly
//! uniform over the `p^q - p` valid assignments.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activations::{ActivationKind, ActivationMap};
use crate::error::{Error, Result};
use crate::network::{Family, LayerSpec, NetworkSpec, Shape3};

/// Exact family sizes for `j`/`k` functions over `m` AL and `n` FC hidden units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyCount {
    pub j: u32,
    pub k: u32,
    pub m: u32,
    pub n: u32,
    pub scnn_ss: BigUint,
    pub mcnn_sm: BigUint,
    pub mcnn_ms: BigUint,
    pub mcnn_mm: BigUint,
    pub scnn_s: BigUint,
    pub mcnn_m: BigUint,
}

/// `base^exp - base`, the number of non-uniform assignments.
fn mixed(base: u32, exp: u32) -> BigUint {
    BigUint::from(base).pow(exp) - BigUint::from(base)
}

pub fn count_families(j: u32, k: u32, m: u32, n: u32) -> Result<FamilyCount> {
    if j == 0 || k == 0 || m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "counts need j, k, m, n >= 1 (got j={j}, k={k}, m={m}, n={n})"
        )));
    }
    let (j_big, k_big) = (BigUint::from(j), BigUint::from(k));
    let (al_mixed, fc_mixed) = (mixed(j, m), mixed(k, n));
    Ok(FamilyCount {
        j,
        k,
        m,
        n,
        scnn_ss: &j_big * &k_big,
        mcnn_sm: &j_big * &fc_mixed,
        mcnn_ms: &al_mixed * &k_big,
        mcnn_mm: &al_mixed * &fc_mixed,
        scnn_s: j_big,
        mcnn_m: al_mixed,
    })
}

/// Single-pool totals for `p` functions over `q` neurons:
/// `(single-function count p, multi-function count p^q - p)`.
pub fn single_pool_counts(functions: u32, neurons: u32) -> (BigUint, BigUint) {
    (BigUint::from(functions), mixed(functions, neurons))
}

impl FamilyCount {
    pub fn get(&self, family: Family) -> &BigUint {
        match family {
            Family::ScnnSs => &self.scnn_ss,
            Family::McnnSm => &self.mcnn_sm,
            Family::McnnMs => &self.mcnn_ms,
            Family::McnnMm => &self.mcnn_mm,
            Family::ScnnS => &self.scnn_s,
            Family::McnnM => &self.mcnn_m,
        }
    }

    /// `j^m k^n`, every assignment with FC layers.
    pub fn total(&self) -> BigUint {
        BigUint::from(self.j).pow(self.m) * BigUint::from(self.k).pow(self.n)
    }

    /// All MCNNs with FC layers: `j^m k^n - j k`.
    pub fn total_mcnn(&self) -> BigUint {
        self.total() - &self.scnn_ss
    }

    /// Both tables as aligned plain text.
    pub fn render_tables(&self) -> String {
        let side = |multi: bool| if multi { "multi-function" } else { "single-function" };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Four types of general CNNs (j={}, k={}, m={}, n={})",
            self.j, self.k, self.m, self.n
        );
        let _ = writeln!(
            out,
            "{:<10}{:<18}{:<20}{:>s$}",
            "CNN Type",
            "AL Neurons",
            "FC Hidden Neurons",
            "No. CNNs",
            s = 24
        );
        for f in [Family::ScnnSs, Family::McnnSm, Family::McnnMs, Family::McnnMm] {
            let _ = writeln!(
                out,
                "{:<10}{:<18}{:<20}{:>s$}",
                f.label(),
                side(f.multi_al()),
                side(f.multi_fc()),
                group_digits(self.get(f)),
                s = 24
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Two types of general CNNs without FCLs (j={}, m={})",
            self.j, self.m
        );
        let _ = writeln!(out, "{:<10}{:<18}{:>s$}", "CNN Type", "AL Neurons", "No. CNNs", s = 24);
        for f in [Family::ScnnS, Family::McnnM] {
            let _ = writeln!(
                out,
                "{:<10}{:<18}{:>s$}",
                f.label(),
                side(f.multi_al()),
                group_digits(self.get(f)),
                s = 24
            );
        }
        out
    }
}

/// `46620` -> `46,620`.
pub fn group_digits(v: &BigUint) -> String {
    let digits = v.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// One convolution block: `CONV -> AL`, optionally followed by max pooling
/// with equal window and stride.
#[derive(Clone, Debug, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlockSpec {
    pub channels: usize,
    pub kernel: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
    #[serde(default)]
    pub pool: Option<usize>,
}

fn one() -> usize {
    1
}

/// Network skeleton whose activation maps are filled in by the builders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub input: Shape3,
    pub blocks: Vec<ConvBlockSpec>,
    pub fc_hidden: Vec<usize>,
    pub classes: usize,
}

impl Topology {
    /// `CONV(8,3,1,1) -> AL -> POOL(2) -> CONV(16,3,1,1) -> AL -> POOL(2) -> FC(64) -> SOFTMAX(10)`
    /// on 28x28 single-channel input.
    pub fn mnist_default() -> Topology {
        Topology {
            input: [1, 28, 28],
            blocks: vec![
                ConvBlockSpec {
                    channels: 8,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                    pool: Some(2),
                },
                ConvBlockSpec {
                    channels: 16,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                    pool: Some(2),
                },
            ],
            fc_hidden: vec![64],
            classes: 10,
        }
    }

    pub fn al_slots(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.channels).collect()
    }

    pub fn fc_slots(&self) -> Vec<usize> {
        self.fc_hidden.clone()
    }

    pub fn instantiate(&self, al: Vec<ActivationMap>, fc: Vec<ActivationMap>, seed: u64) -> Result<NetworkSpec> {
        if al.len() != self.blocks.len() || fc.len() != self.fc_hidden.len() {
            return Err(Error::config(format!(
                "topology has {} conv blocks and {} FC layers, got {} and {} maps",
                self.blocks.len(),
                self.fc_hidden.len(),
                al.len(),
                fc.len()
            )));
        }
        let mut layers = Vec::new();
        for (block, map) in self.blocks.iter().zip(al) {
            layers.push(LayerSpec::Conv {
                out_channels: block.channels,
                kernel: block.kernel,
                stride: block.stride,
                padding: block.padding,
            });
            layers.push(LayerSpec::Act(map));
            if let Some(p) = block.pool {
                layers.push(LayerSpec::pool(p));
            }
        }
        layers.push(LayerSpec::Flatten);
        for (&width, map) in self.fc_hidden.iter().zip(fc) {
            layers.push(LayerSpec::Fc {
                out_neurons: width,
                map,
            });
        }
        layers.push(LayerSpec::SoftmaxHead { classes: self.classes });
        NetworkSpec::new(self.input, layers, seed)
    }

    /// Single-function network: every AL slot uses `al`, every FC slot uses `fc`.
    pub fn uniform(&self, al: ActivationKind, fc: ActivationKind, seed: u64) -> Result<NetworkSpec> {
        let al_maps = self
            .al_slots()
            .into_iter()
            .map(|n| ActivationMap::uniform(al, n))
            .collect::<Result<_>>()?;
        let fc_maps = self
            .fc_slots()
            .into_iter()
            .map(|n| ActivationMap::uniform(fc, n))
            .collect::<Result<_>>()?;
        self.instantiate(al_maps, fc_maps, seed)
    }
}

/// What one assignment unit covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AssignGranularity {
    /// Every channel / neuron gets its own function.
    #[default]
    Slot,
    /// Every activation layer / FC hidden layer gets one function.
    Layer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentPlan {
    pub topology: Topology,
    pub al_pool: Vec<ActivationKind>,
    pub fc_pool: Vec<ActivationKind>,
    pub family: Family,
    pub granularity: AssignGranularity,
    pub seed: u64,
}

impl AssignmentPlan {
    pub fn al_slots(&self) -> Vec<usize> {
        self.topology.al_slots()
    }

    pub fn fc_slots(&self) -> Vec<usize> {
        self.topology.fc_slots()
    }

    fn units(&self, slots: &[usize]) -> usize {
        match self.granularity {
            AssignGranularity::Slot => slots.iter().sum(),
            AssignGranularity::Layer => slots.len(),
        }
    }

    /// Number of independently assigned units on the AL side.
    pub fn al_units(&self) -> usize {
        self.units(&self.al_slots())
    }

    pub fn fc_units(&self) -> usize {
        self.units(&self.fc_slots())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, pool) in [("al_pool", &self.al_pool), ("fc_pool", &self.fc_pool)] {
            if pool.is_empty() {
                return Err(Error::config_field(name, "function pool is empty"));
            }
            for (i, k) in pool.iter().enumerate() {
                if pool[..i].contains(k) {
                    return Err(Error::config_field(name, format!("duplicate function {k}")));
                }
            }
        }
        if self.topology.blocks.is_empty() {
            return Err(Error::config_field("topology", "at least one conv block is required"));
        }
        let has_fc = !self.topology.fc_hidden.is_empty();
        if self.family.has_fc() != has_fc {
            return Err(Error::config_field(
                "family",
                format!(
                    "{} {} FC hidden layers",
                    self.family,
                    if self.family.has_fc() {
                        "requires"
                    } else {
                        "does not allow"
                    }
                ),
            ));
        }
        let check_multi = |name: &str, pool: &[ActivationKind], units: usize| {
            if pool.len() < 2 {
                return Err(Error::config_field(
                    name,
                    format!(
                        "{} needs at least two functions on its multi-function side",
                        self.family
                    ),
                ));
            }
            if units < 2 {
                return Err(Error::config_field(
                    name,
                    format!(
                        "{} needs at least two assignment units on its multi-function side",
                        self.family
                    ),
                ));
            }
            Ok(())
        };
        if self.family.multi_al() {
            check_multi("al_pool", &self.al_pool, self.al_units())?;
        }
        if self.family.multi_fc() {
            check_multi("fc_pool", &self.fc_pool, self.fc_units())?;
        }
        Ok(())
    }

    /// Expands per-unit pool indices into per-layer maps.
    fn maps(&self, slots: &[usize], pool: &[ActivationKind], units: &[usize]) -> Result<Vec<ActivationMap>> {
        let mut maps = Vec::with_capacity(slots.len());
        let mut cursor = 0;
        for &n in slots {
            let kinds = match self.granularity {
                AssignGranularity::Slot => {
                    let kinds = units[cursor..cursor + n].iter().map(|&u| pool[u]).collect();
                    cursor += n;
                    kinds
                }
                AssignGranularity::Layer => {
                    let k = pool[units[cursor]];
                    cursor += 1;
                    vec![k; n]
                }
            };
            maps.push(ActivationMap::new(kinds)?);
        }
        Ok(maps)
    }

    fn realize(&self, al_units: &[usize], fc_units: &[usize]) -> Result<NetworkSpec> {
        let al = self.maps(&self.al_slots(), &self.al_pool, al_units)?;
        let fc = self.maps(&self.fc_slots(), &self.fc_pool, fc_units)?;
        self.topology.instantiate(al, fc, self.seed)
    }

    /// Exact number of assignments in the plan's family.
    pub fn space_size(&self) -> BigUint {
        let side = |pool: usize, units: usize, multi: bool| {
            if multi {
                mixed(pool as u32, units as u32)
            } else {
                BigUint::from(pool)
            }
        };
        let al = side(self.al_pool.len(), self.al_units(), self.family.multi_al());
        if self.family.has_fc() {
            al * side(self.fc_pool.len(), self.fc_units(), self.family.multi_fc())
        } else {
            al
        }
    }
}

/// Draws one side: a single shared function, or i.i.d. units with all-uniform draws rejected.
fn sample_side(rng: &mut ChaCha8Rng, pool: usize, units: usize, multi: bool) -> Vec<usize> {
    if !multi {
        return vec![rng.gen_range(0..pool); units];
    }
    loop {
        let draw: Vec<usize> = (0..units).map(|_| rng.gen_range(0..pool)).collect();
        if draw.windows(2).any(|w| w[0] != w[1]) {
            return draw;
        }
    }
}

/// Samples one network uniformly from the plan's family.
pub fn sample_assignment(plan: &AssignmentPlan) -> Result<NetworkSpec> {
    plan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let al = sample_side(&mut rng, plan.al_pool.len(), plan.al_units(), plan.family.multi_al());
    let fc = if plan.family.has_fc() {
        sample_side(&mut rng, plan.fc_pool.len(), plan.fc_units(), plan.family.multi_fc())
    } else {
        Vec::new()
    };
    plan.realize(&al, &fc)
}

fn build_for(plan: &AssignmentPlan, target: Family) -> Result<NetworkSpec> {
    if plan.family != target {
        return Err(Error::config_field(
            "family",
            format!("builder for {target} called with a {} plan", plan.family),
        ));
    }
    sample_assignment(plan)
}

/// Uniform conv activation layers, heterogeneous FC hidden layers.
pub fn build_mcnn_sm(plan: &AssignmentPlan) -> Result<NetworkSpec> {
    build_for(plan, Family::McnnSm)
}

/// Heterogeneous conv activation layers, uniform FC hidden layers.
pub fn build_mcnn_ms(plan: &AssignmentPlan) -> Result<NetworkSpec> {
    build_for(plan, Family::McnnMs)
}

/// Heterogeneous on both sides.
pub fn build_mcnn_mm(plan: &AssignmentPlan) -> Result<NetworkSpec> {
    build_for(plan, Family::McnnMm)
}

/// Heterogeneous conv activation layers, no FC hidden layers.
pub fn build_mcnn_m(plan: &AssignmentPlan) -> Result<NetworkSpec> {
    build_for(plan, Family::McnnM)
}

/// Dispatches to the builder for `plan.family`; single-function families are not built this way.
pub fn build_mcnn(plan: &AssignmentPlan) -> Result<NetworkSpec> {
    match plan.family {
        Family::McnnSm => build_mcnn_sm(plan),
        Family::McnnMs => build_mcnn_ms(plan),
        Family::McnnMm => build_mcnn_mm(plan),
        Family::McnnM => build_mcnn_m(plan),
        other => Err(Error::config_field(
            "family",
            format!("{other} is not a multi-function family"),
        )),
    }
}

/// All valid unit vectors for one side, in lexicographic order of pool indices.
fn side_assignments(pool: usize, units: usize, multi: bool) -> Vec<Vec<usize>> {
    if !multi {
        return (0..pool).map(|k| vec![k; units]).collect();
    }
    let mut out = Vec::new();
    let mut cur = vec![0; units];
    loop {
        if cur.windows(2).any(|w| w[0] != w[1]) {
            out.push(cur.clone());
        }
        // Odometer increment, rightmost digit fastest.
        let mut pos = units;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            cur[pos] += 1;
            if cur[pos] < pool {
                break;
            }
            cur[pos] = 0;
        }
    }
}

/// Every distinct assignment of the plan's family in lexicographic order
/// (AL units first, then FC units), provided the space has at most `limit` members.
pub fn enumerate_assignments(plan: &AssignmentPlan, limit: usize) -> Result<Vec<NetworkSpec>> {
    plan.validate()?;
    let count = plan.space_size();
    if count > BigUint::from(limit) {
        return Err(Error::SpaceTooLarge { count, limit });
    }
    let al = side_assignments(plan.al_pool.len(), plan.al_units(), plan.family.multi_al());
    let fc = if plan.family.has_fc() {
        side_assignments(plan.fc_pool.len(), plan.fc_units(), plan.family.multi_fc())
    } else {
        vec![Vec::new()]
    };
    let mut out = Vec::with_capacity(count.to_usize().unwrap_or(0));
    for a in &al {
        for f in &fc {
            out.push(plan.realize(a, f)?);
        }
    }
    debug_assert!(count.is_zero() || out.len() == count.to_usize().unwrap_or(usize::MAX));
    Ok(out)
}
