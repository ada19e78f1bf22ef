//! Classification of a time window `[0, t]` into small and large
//! `T`-intervals from a vector of dyadic size classes `k_n`, one per unit
//! interval `n = [n-1, n]`.
//!
//! Conventions: intervals are closed with integer endpoints; the unit interval
//! `n` lies in `L = [a, b]` when `a <= n-1` and `n <= b`. For `L` with positive
//! length, `γ_L = Σ_{n ⊂ L} 2^{k_n}`, and `β(L) = β|L|` if `|L| > T/2`,
//! otherwise `βT/2`. The set `𝓛` holds every `L` with `γ_L > β(L)` and every
//! block `[(j-1)T, jT]` with `2^{k_{jT}} > β'T`. Each member is widened to the
//! smallest `T`-interval containing it; maximal runs of covered blocks
//! (touching closed intervals merge) are the large intervals and the
//! remaining length-`T` blocks are small.

use std::fmt;

use crate::error::{invalid, Error, Result};

/// Size classes `k_1, ..., k_t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KVector {
    values: Vec<u32>,
}

/// Classes above this are rejected (`2^k` must stay finite).
pub const MAX_CLASS: u32 = 1000;

impl KVector {
    pub fn new(values: Vec<u32>) -> Result<Self> {
        if let Some(k) = values.iter().find(|&&k| k > MAX_CLASS) {
            return Err(invalid("k", format!("class {k} exceeds {MAX_CLASS}")));
        }
        Ok(Self { values })
    }

    /// Whitespace-separated non-negative integers.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (n, line) in text.lines().enumerate() {
            for tok in line.split_whitespace() {
                let k = tok.parse::<u32>().map_err(|e| Error::Parse {
                    line: n + 1,
                    reason: format!("{tok:?}: {e}"),
                })?;
                values.push(k);
            }
        }
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// `k_n` for `n = 1..=t`.
    pub fn k(&self, n: usize) -> u32 {
        self.values[n - 1]
    }

    /// Classes of the unit intervals inside `[start, end]`, re-indexed from 1.
    pub fn window(&self, start: usize, end: usize) -> KVector {
        KVector {
            values: self.values[start..end].to_vec(),
        }
    }

    pub fn concat(parts: &[KVector]) -> KVector {
        KVector {
            values: parts.iter().flat_map(|p| p.values.iter().copied()).collect(),
        }
    }

    fn weights(&self) -> Vec<f64> {
        self.values.iter().map(|&k| 2f64.powi(k as i32)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionParams {
    /// Block length `T`.
    pub t_block: usize,
    pub beta: f64,
    pub beta_prime: f64,
    /// Scale of the partition of unity.
    pub r: f64,
}

impl PartitionParams {
    pub fn new(t_block: usize, beta: f64, beta_prime: f64, r: f64) -> Result<Self> {
        let p = Self {
            t_block,
            beta,
            beta_prime,
            r,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_block < 1 {
            return Err(invalid("T", "must be at least 1"));
        }
        if !(self.beta_prime > 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta_prime", "must be positive"));
        }
        if !(self.beta_prime < self.beta) {
            return Err(invalid("beta_prime", "must be smaller than beta"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(invalid("R", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Small,
    Large,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Small => "small",
            Label::Large => "large",
        })
    }
}

/// Labeled `T`-interval `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Block {
    pub start: usize,
    pub end: usize,
    pub label: Label,
}

impl Block {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    fn shifted(self, by: usize) -> Block {
        Block {
            start: self.start + by,
            end: self.end + by,
            label: self.label,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalPartition {
    pub window: usize,
    pub t_block: usize,
    pub blocks: Vec<Block>,
}

impl IntervalPartition {
    /// Text form: one `start end label` line per block.
    pub fn to_text(&self) -> String {
        self.blocks
            .iter()
            .map(|b| format!("{} {} {}\n", b.start, b.end, b.label))
            .collect()
    }

    pub fn is_all_small(&self) -> bool {
        self.blocks.iter().all(|b| b.label == Label::Small)
    }

    /// Tiling, block-length and separation invariants.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut pos = 0;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.start != pos || b.end <= b.start {
                return Err(format!("block {i} does not continue the tiling"));
            }
            if b.start % self.t_block != 0 || b.end % self.t_block != 0 {
                return Err(format!("block {i} is not a T-interval"));
            }
            if b.len() > self.t_block && b.label != Label::Large {
                return Err(format!("long block {i} labeled small"));
            }
            if i > 0 && b.label == Label::Large && self.blocks[i - 1].label == Label::Large {
                return Err(format!("blocks {} and {i} are adjacent large blocks", i - 1));
            }
            pos = b.end;
        }
        if pos != self.window {
            return Err("blocks do not cover the window".into());
        }
        Ok(())
    }
}

/// Partition of unity on `[0, ∞)`: `φ_0 = 1` on `[0, 2R]`, and `φ_k`, `k >= 1`,
/// rises on `[2^k R, 2^{k+1} R]` and falls on `[2^{k+1} R, 2^{k+2} R]`, with the
/// C¹ smoothstep `3y² - 2y³` in every transition. `Σ_k φ_k = 1` and
/// `supp φ_k ⊂ [2^k R, 2^{k+2} R]` (`[0, 4R]` for `k = 0`).
pub fn phi(k: u32, x: f64, r: f64) -> f64 {
    fn smooth(y: f64) -> f64 {
        let y = y.clamp(0.0, 1.0);
        y * y * (3.0 - 2.0 * y)
    }
    let lo = 2f64.powi(k as i32) * r;
    let mid = 2.0 * lo;
    let hi = 4.0 * lo;
    if x >= hi {
        return 0.0;
    }
    if x >= mid {
        return 1.0 - smooth((x - mid) / mid);
    }
    if k == 0 {
        return 1.0;
    }
    if x <= lo {
        return 0.0;
    }
    smooth((x - lo) / lo)
}

/// Class `k` with the largest weight `φ_k(x)` (the smaller one on ties).
pub fn dominant_class(x: f64, r: f64) -> u32 {
    let mut k = 0;
    // x lies in the support of φ_j only for 2^j R < x
    while k < MAX_CLASS && 2f64.powi(k as i32 + 1) * r < x {
        k += 1;
    }
    let lower = k.saturating_sub(1);
    if phi(lower, x, r) >= phi(k, x, r) {
        lower
    } else {
        k
    }
}

pub fn kvector_from_dn(dn: &[f64], r: f64) -> KVector {
    KVector {
        values: dn.iter().map(|&d| dominant_class(d, r)).collect(),
    }
}

/// `χ_k = Π_n φ_{k_n}(D_n)`.
pub fn chi_weight(kv: &KVector, dn: &[f64], r: f64) -> f64 {
    kv.values.iter().zip(dn).map(|(&k, &d)| phi(k, d, r)).product()
}

/// `γ_L` for `L = [start, end]`.
pub fn gamma_l(kv: &KVector, start: usize, end: usize) -> f64 {
    assert!(start <= end && end <= kv.len(), "interval outside the window");
    kv.values[start..end].iter().map(|&k| 2f64.powi(k as i32)).sum()
}

/// `β(L)` for an interval of length `len`.
pub fn beta_of(len: usize, params: &PartitionParams) -> f64 {
    if 2 * len > params.t_block {
        params.beta * len as f64
    } else {
        params.beta * params.t_block as f64 / 2.0
    }
}

struct Prefix(Vec<f64>);

impl Prefix {
    fn new(kv: &KVector) -> Self {
        let mut p = Vec::with_capacity(kv.len() + 1);
        p.push(0.0);
        let mut acc = 0.0;
        for w in kv.weights() {
            acc += w;
            p.push(acc);
        }
        Self(p)
    }

    fn gamma(&self, start: usize, end: usize) -> f64 {
        self.0[end] - self.0[start]
    }
}

/// Every `L = [a, b]`, `a < b`, with `γ_L > β(L)`.
pub fn qualifying_intervals(kv: &KVector, params: &PartitionParams) -> Vec<(usize, usize)> {
    let pre = Prefix::new(kv);
    let t = kv.len();
    let mut out = Vec::new();
    for a in 0..t {
        for b in a + 1..=t {
            if pre.gamma(a, b) > beta_of(b - a, params) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Block indices `j` (0-based, block `[jT, (j+1)T]`) whose last class satisfies
/// `2^k > β'T`.
pub fn boundary_spike_blocks(kv: &KVector, params: &PartitionParams) -> Vec<usize> {
    let tb = params.t_block;
    (0..kv.len() / tb)
        .filter(|&j| 2f64.powi(kv.k((j + 1) * tb) as i32) > params.beta_prime * tb as f64)
        .collect()
}

/// Blocks `[lo, hi)` (0-based) covered by the `T`-closure of `[a, b]`.
fn closure_blocks(a: usize, b: usize, tb: usize) -> (usize, usize) {
    (a / tb, b.div_ceil(tb))
}

pub fn classify(kv: &KVector, params: &PartitionParams) -> Result<IntervalPartition> {
    params.validate()?;
    let t = kv.len();
    let tb = params.t_block;
    if t % tb != 0 {
        return Err(invalid("window", format!("length {t} is not a multiple of T = {tb}")));
    }
    let nblocks = t / tb;
    let mut covered = vec![false; nblocks];
    for (a, b) in qualifying_intervals(kv, params) {
        let (lo, hi) = closure_blocks(a, b, tb);
        covered[lo..hi].iter_mut().for_each(|c| *c = true);
    }
    for j in boundary_spike_blocks(kv, params) {
        covered[j] = true;
    }
    let mut blocks = Vec::new();
    let mut j = 0;
    while j < nblocks {
        if covered[j] {
            let start = j;
            while j < nblocks && covered[j] {
                j += 1;
            }
            blocks.push(Block {
                start: start * tb,
                end: j * tb,
                label: Label::Large,
            });
        } else {
            blocks.push(Block {
                start: j * tb,
                end: (j + 1) * tb,
                label: Label::Small,
            });
            j += 1;
        }
    }
    Ok(IntervalPartition {
        window: t,
        t_block: tb,
        blocks,
    })
}

/// Outcome of the small/large property checks on one partition.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lemma41Report {
    pub small_checked: usize,
    pub large_checked: usize,
    pub violations: Vec<String>,
}

impl Lemma41Report {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// (a) every small `J` has `Σ_{n⊂J} 2^{k_n} <= βT` and `2^{k_τ} <= β'T` at its
/// right end `τ`; (b) every large `J` splits as `J' ∪ J''`, where `J'` is the
/// union of the closures of the `L ⊂ J` with `γ_L > β(L)`, `γ_{J'} > β|J'|/4`,
/// and every block of `J''` satisfies the boundary-spike condition.
pub fn verify_lemma41(partition: &IntervalPartition, kv: &KVector, params: &PartitionParams) -> Lemma41Report {
    let tb = params.t_block;
    let pre = Prefix::new(kv);
    let spikes = boundary_spike_blocks(kv, params);
    let qualifying = qualifying_intervals(kv, params);
    let mut rep = Lemma41Report::default();
    for b in &partition.blocks {
        match b.label {
            Label::Small => {
                rep.small_checked += 1;
                let g = pre.gamma(b.start, b.end);
                if g > params.beta * tb as f64 {
                    rep.violations.push(format!("small [{}, {}]: sum {g} > βT", b.start, b.end));
                }
                let last = 2f64.powi(kv.k(b.end) as i32);
                if last > params.beta_prime * tb as f64 {
                    rep.violations.push(format!("small [{}, {}]: end class too large", b.start, b.end));
                }
            }
            Label::Large => {
                rep.large_checked += 1;
                let (lo, hi) = (b.start / tb, b.end / tb);
                let mut in_prime = vec![false; hi - lo];
                for &(a, e) in &qualifying {
                    let (cl, ch) = closure_blocks(a, e, tb);
                    if cl >= lo && ch <= hi {
                        in_prime[cl - lo..ch - lo].iter_mut().for_each(|c| *c = true);
                    }
                }
                let mut g = 0.0;
                let mut len = 0;
                for (off, &inside) in in_prime.iter().enumerate() {
                    let j = lo + off;
                    if inside {
                        g += pre.gamma(j * tb, (j + 1) * tb);
                        len += tb;
                    } else if !spikes.contains(&j) {
                        rep.violations.push(format!(
                            "large [{}, {}]: block [{}, {}] is neither in J' nor a boundary spike",
                            b.start,
                            b.end,
                            j * tb,
                            (j + 1) * tb
                        ));
                    }
                }
                if len > 0 && !(g > 0.25 * params.beta * len as f64) {
                    rep.violations.push(format!(
                        "large [{}, {}]: γ_J' = {g} <= β|J'|/4 with |J'| = {len}",
                        b.start, b.end
                    ));
                }
            }
        }
    }
    rep
}

/// Both sides of the gluing equivalence for one labeled partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lemma42Outcome {
    /// Classifying the concatenation gives back the given blocks.
    pub glued: bool,
    /// No straddling `L` has `γ_L > β(L)`.
    pub constraints: bool,
}

impl Lemma42Outcome {
    pub fn holds(&self) -> bool {
        self.glued == self.constraints
    }
}

/// `L = [a, b]` straddles the boundary `τ` between consecutive blocks when
/// `a < τ < b` and `L` lies inside the union of the two blocks.
pub fn straddling_constraints_hold(blocks: &[Block], kv: &KVector, params: &PartitionParams) -> bool {
    let pre = Prefix::new(kv);
    blocks.windows(2).all(|w| {
        let tau = w[0].end;
        (w[0].start..tau).all(|a| (tau + 1..=w[1].end).all(|b| pre.gamma(a, b) <= beta_of(b - a, params)))
    })
}

/// `blocks` is a labeled partition of the window and `parts[i]` the classes
/// on block `i`; every part must classify to its own block (else a
/// precondition error).
pub fn verify_lemma42(blocks: &[Block], parts: &[KVector], params: &PartitionParams) -> Result<Lemma42Outcome> {
    if blocks.len() != parts.len() || blocks.is_empty() {
        return Err(Error::Precondition("one class vector per block required".into()));
    }
    let mut pos = 0;
    for (b, k) in blocks.iter().zip(parts) {
        if b.start != pos || k.len() != b.len() {
            return Err(Error::Precondition("blocks must tile the window and match their class vectors".into()));
        }
        let own = classify(k, params)?;
        let expect = Block {
            start: 0,
            end: b.len(),
            label: b.label,
        };
        if own.blocks != [expect] {
            return Err(Error::Precondition(format!(
                "classes on [{}, {}] do not classify to a single {} block",
                b.start, b.end, b.label
            )));
        }
        pos = b.end;
    }
    let kv = KVector::concat(parts);
    let whole = classify(&kv, params)?;
    let glued = whole.blocks == blocks;
    let constraints = straddling_constraints_hold(blocks, &kv, params);
    Ok(Lemma42Outcome { glued, constraints })
}

/// All tilings of `[0, t]` by `T`-intervals with labels such that every
/// block longer than `T` is large. With `admissible_only`, adjacent large
/// blocks are excluded.
pub fn labeled_tilings(window: usize, t_block: usize, admissible_only: bool) -> Vec<Vec<Block>> {
    fn rec(pos: usize, window: usize, tb: usize, adm: bool, cur: &mut Vec<Block>, out: &mut Vec<Vec<Block>>) {
        if pos == window {
            out.push(cur.clone());
            return;
        }
        let mut end = pos + tb;
        while end <= window {
            let labels: &[Label] = if end - pos == tb {
                &[Label::Small, Label::Large]
            } else {
                &[Label::Large]
            };
            for &label in labels {
                if adm && label == Label::Large && cur.last().is_some_and(|b| b.label == Label::Large) {
                    continue;
                }
                cur.push(Block { start: pos, end, label });
                rec(end, window, tb, adm, cur, out);
                cur.pop();
            }
            end += tb;
        }
    }
    let mut out = Vec::new();
    rec(0, window, t_block, admissible_only, &mut Vec::new(), &mut out);
    out
}

/// Result of an exhaustive gluing scan.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lemma42Scan {
    /// (class vector, partition) pairs meeting the precondition.
    pub cases: usize,
    pub glued: usize,
    pub counterexamples: Vec<(Vec<u32>, Vec<Block>)>,
}

/// Every class vector with entries in `0..=max_class` on `[0, window]` against
/// every labeled tiling (optionally admissible ones only).
pub fn scan_lemma42(window: usize, max_class: u32, params: &PartitionParams, admissible_only: bool) -> Result<Lemma42Scan> {
    let tilings = labeled_tilings(window, params.t_block, admissible_only);
    let base = max_class as usize + 1;
    let total = base.pow(window as u32);
    let mut scan = Lemma42Scan::default();
    let mut values = vec![0u32; window];
    for code in 0..total {
        let mut c = code;
        for v in values.iter_mut() {
            *v = (c % base) as u32;
            c /= base;
        }
        let kv = KVector::new(values.clone())?;
        for tiling in &tilings {
            let parts: Vec<KVector> = tiling.iter().map(|b| kv.window(b.start, b.end)).collect();
            let local: Vec<Block> = tiling.iter().map(|b| b.shifted(0)).collect();
            match verify_lemma42(&local, &parts, params) {
                Ok(outcome) => {
                    scan.cases += 1;
                    if outcome.glued {
                        scan.glued += 1;
                    }
                    if !outcome.holds() {
                        scan.counterexamples.push((values.clone(), tiling.clone()));
                    }
                }
                Err(Error::Precondition(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(scan)
}
