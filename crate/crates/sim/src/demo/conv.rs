//! Convolution with three interchangeable implementations, tuned per call.
//!
//! All variants compute the full linear convolution (length `n + kk − 1`) and
//! agree to high precision; they differ only in cost profile. Direct wins on
//! small kernels, the radix-2 FFT wins when `n·kk` dwarfs `N·log N`, and the
//! blocked form trades loop overhead for cache locality in between. Size
//! features let a contextual tuner pick per call instead of per workload.

use std::f64::consts::PI;
use std::time::Instant;

use mabtune::{PolicySpec, Tuner, TunerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Plain nested-loop convolution; O(n·kk) with a small constant.
pub fn convolve_direct(x: &[f64], k: &[f64]) -> Vec<f64> {
    if x.is_empty() || k.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; x.len() + k.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &kj) in k.iter().enumerate() {
            out[i + j] += xi * kj;
        }
    }
    out
}

/// Cache-tiled convolution: kernel taps in tiles, signal in chunks.
pub fn convolve_blocked(x: &[f64], k: &[f64]) -> Vec<f64> {
    const K_TILE: usize = 64;
    const X_CHUNK: usize = 4096;
    if x.is_empty() || k.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; x.len() + k.len() - 1];
    for (jb, ktile) in k.chunks(K_TILE).enumerate() {
        let j0 = jb * K_TILE;
        for (ib, xchunk) in x.chunks(X_CHUNK).enumerate() {
            let i0 = ib * X_CHUNK;
            for (di, &xi) in xchunk.iter().enumerate() {
                let base = i0 + di + j0;
                for (dj, &kj) in ktile.iter().enumerate() {
                    out[base + dj] += xi * kj;
                }
            }
        }
    }
    out
}

/// Iterative radix-2 FFT over parallel re/im slices. Length must be a power
/// of two.
fn fft_in_place(re: &mut [f64], im: &mut [f64], invert: bool) {
    let n = re.len();
    debug_assert!(n.is_power_of_two());
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let sign = if invert { 1.0 } else { -1.0 };
    let mut len = 2usize;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let (step_sin, step_cos) = ang.sin_cos();
        for start in (0..n).step_by(len) {
            let mut wr = 1.0f64;
            let mut wi = 0.0f64;
            for off in 0..len / 2 {
                let a = start + off;
                let b = a + len / 2;
                let vr = re[b] * wr - im[b] * wi;
                let vi = re[b] * wi + im[b] * wr;
                re[b] = re[a] - vr;
                im[b] = im[a] - vi;
                re[a] += vr;
                im[a] += vi;
                let next_wr = wr * step_cos - wi * step_sin;
                wi = wr * step_sin + wi * step_cos;
                wr = next_wr;
            }
        }
        len <<= 1;
    }
    if invert {
        let scale = 1.0 / n as f64;
        for v in re.iter_mut() {
            *v *= scale;
        }
        for v in im.iter_mut() {
            *v *= scale;
        }
    }
}

/// FFT convolution: zero-pad to the next power of two ≥ n + kk − 1.
pub fn convolve_fft(x: &[f64], k: &[f64]) -> Vec<f64> {
    if x.is_empty() || k.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + k.len() - 1;
    let size = out_len.next_power_of_two();
    let mut xr = vec![0.0; size];
    let mut xi = vec![0.0; size];
    let mut kr = vec![0.0; size];
    let mut ki = vec![0.0; size];
    xr[..x.len()].copy_from_slice(x);
    kr[..k.len()].copy_from_slice(k);
    fft_in_place(&mut xr, &mut xi, false);
    fft_in_place(&mut kr, &mut ki, false);
    for i in 0..size {
        let re = xr[i] * kr[i] - xi[i] * ki[i];
        let im = xr[i] * ki[i] + xi[i] * kr[i];
        xr[i] = re;
        xi[i] = im;
    }
    fft_in_place(&mut xr, &mut xi, true);
    xr.truncate(out_len);
    xr
}

/// The three interchangeable implementations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMethod {
    Direct,
    Fft,
    Blocked,
}

impl ConvMethod {
    pub const ALL: [ConvMethod; 3] = [ConvMethod::Direct, ConvMethod::Fft, ConvMethod::Blocked];

    pub fn name(self) -> &'static str {
        match self {
            ConvMethod::Direct => "direct",
            ConvMethod::Fft => "fft",
            ConvMethod::Blocked => "blocked",
        }
    }

    pub fn run(self, x: &[f64], k: &[f64]) -> Vec<f64> {
        match self {
            ConvMethod::Direct => convolve_direct(x, k),
            ConvMethod::Fft => convolve_fft(x, k),
            ConvMethod::Blocked => convolve_blocked(x, k),
        }
    }
}

/// One convolution request.
#[derive(Debug, Clone)]
pub struct ConvCase {
    pub signal: Vec<f64>,
    pub kernel: Vec<f64>,
}

impl ConvCase {
    /// Size features: interaction term, signal length, and the n·log n
    /// proxies that track the direct and FFT cost laws.
    pub fn features(&self) -> [f64; 4] {
        let n = self.signal.len() as f64;
        let kk = self.kernel.len() as f64;
        [n * kk, n, n * n.log2().max(0.0), kk * kk.log2().max(0.0)]
    }
}

/// Shape of the generated request stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadKind {
    /// Alternating small and large kernels in random order: no single
    /// implementation is best for every request.
    MixedKernels,
    /// Mid-sized kernels only; one implementation dominates throughout.
    Uniform,
}

fn random_signal(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Generates a seeded request stream.
pub fn make_workload(kind: WorkloadKind, count: usize, seed: u64) -> Vec<ConvCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (n, kk) = match kind {
                WorkloadKind::MixedKernels => {
                    if rng.random::<bool>() {
                        let taps = [7usize, 9, 11];
                        (rng.random_range(3_000..5_000), taps[rng.random_range(0..taps.len())])
                    } else {
                        let taps = [3_583usize, 4_095];
                        (rng.random_range(6_000..8_000), taps[rng.random_range(0..taps.len())])
                    }
                }
                WorkloadKind::Uniform => (rng.random_range(2_800..3_200), 65),
            };
            ConvCase { signal: random_signal(n, &mut rng), kernel: random_signal(kk, &mut rng) }
        })
        .collect()
}

/// How the adaptive operator picks an implementation per request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvSelector {
    /// Contextual tuner on the size features.
    Contextual,
    /// Contextual tuner fed seeded noise instead of size features — a
    /// worst-case check that useless context degrades gracefully.
    ContextualRandomFeatures,
    /// Context-free tuner: one best implementation for the whole stream.
    ContextFree,
    /// No tuning; always the given implementation.
    Fixed(ConvMethod),
}

/// Outcome of running a request stream through one selector.
#[derive(Debug)]
pub struct ConvReport {
    /// Last output, kept so callers can check results flow through.
    pub last_output: Vec<f64>,
    /// Picks per implementation, in `ConvMethod::ALL` order.
    pub counts: [u64; 3],
    /// Measured seconds per request.
    pub case_secs: Vec<f64>,
}

impl ConvReport {
    /// Total measured time over requests `from..`.
    pub fn total_secs_after(&self, from: usize) -> f64 {
        self.case_secs[from.min(self.case_secs.len())..].iter().sum()
    }
}

/// Convolves every request, tuning the implementation choice online.
pub fn adaptive_convolve(cases: &[ConvCase], selector: ConvSelector, seed: u64) -> Result<ConvReport> {
    adaptive_convolve_with(cases, selector, seed, 1.0)
}

/// [`adaptive_convolve`] with an explicit ridge strength for the contextual
/// selectors.
pub fn adaptive_convolve_with(
    cases: &[ConvCase],
    selector: ConvSelector,
    seed: u64,
    lambda: f64,
) -> Result<ConvReport> {
    let tuner = match selector {
        ConvSelector::Contextual | ConvSelector::ContextualRandomFeatures => Some(Tuner::new(
            TunerConfig::new(ConvMethod::ALL.to_vec(), PolicySpec::Contextual { dim: 4, lambda })
                .with_seed(seed),
        )?),
        ConvSelector::ContextFree => Some(Tuner::new(
            TunerConfig::new(
                ConvMethod::ALL.to_vec(),
                PolicySpec::ContextFree(mabtune::PolicyKind::Thompson),
            )
            .with_seed(seed),
        )?),
        ConvSelector::Fixed(_) => None,
    };
    let mut noise = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let mut counts = [0u64; 3];
    let mut case_secs = Vec::with_capacity(cases.len());
    let mut last_output = Vec::new();
    for case in cases {
        let (method, token) = match (selector, &tuner) {
            (ConvSelector::Fixed(m), _) => (m, None),
            (ConvSelector::Contextual, Some(t)) => {
                let features = case.features();
                let (m, tok) = t.choose_with_context(&features)?;
                (*m, Some(tok))
            }
            (ConvSelector::ContextualRandomFeatures, Some(t)) => {
                let features: [f64; 4] = std::array::from_fn(|_| noise.random_range(-1.0..1.0));
                let (m, tok) = t.choose_with_context(&features)?;
                (*m, Some(tok))
            }
            (ConvSelector::ContextFree, Some(t)) => {
                let (m, tok) = t.choose()?;
                (*m, Some(tok))
            }
            _ => unreachable!("tuner presence follows the selector"),
        };
        let started = Instant::now();
        let out = method.run(&case.signal, &case.kernel);
        let secs = started.elapsed().as_secs_f64();
        if let (Some(t), Some(tok)) = (&tuner, token) {
            t.observe(&tok, -secs)?;
        }
        let idx = ConvMethod::ALL.iter().position(|m| *m == method).expect("known method");
        counts[idx] += 1;
        case_secs.push(secs);
        last_output = out;
    }
    Ok(ConvReport { last_output, counts, case_secs })
}
