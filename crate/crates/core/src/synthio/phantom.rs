//! Deterministic synthetic chest phantoms.
//!
//! Geometry is a fixed set of axis-aligned ellipsoids/boxes in relative
//! coordinates, painted with a priority order so every voxel belongs to at
//! most one anatomy. Tissue HU levels are documented constants plus seeded
//! Gaussian noise. With `case_flag` set, four disease signatures are
//! injected: calcified foci in aorta/heart, reduced vertebral HU, a fraction
//! of lung voxels pushed below -950 HU, and an enlarged heart.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::volume::{Anatomy, AnatomyMask, StudyRecord, Volume, ALL_ANATOMIES};

pub const MIN_DIMS: (usize, usize, usize) = (16, 16, 4);
pub const DEFAULT_NOISE_SIGMA: f64 = 20.0;

/// Everything that determines one phantom. Same spec, same output, always.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub seed: u64,
    pub dims: (usize, usize, usize),
    pub spacing: (f64, f64, f64),
    pub case_flag: bool,
    /// Density of calcified foci in aorta/heart, in [0, 1].
    pub calcification: f64,
    /// Mean HU subtracted from the spinal column, in [0, 300].
    pub vertebral_hu_reduction: f64,
    /// Target fraction of lung voxels below -950 HU, in [0, 1].
    pub emphysema_fraction: f64,
    /// Heart volume multiplier, in [1, 2].
    pub heart_enlargement: f64,
    /// Per-tissue Gaussian noise, HU.
    pub noise_sigma: f64,
}

impl PhantomSpec {
    pub fn control(seed: u64, dims: (usize, usize, usize)) -> PhantomSpec {
        PhantomSpec {
            seed,
            dims,
            spacing: (0.7, 0.7, 5.0),
            case_flag: false,
            calcification: 0.0,
            vertebral_hu_reduction: 0.0,
            emphysema_fraction: 0.0,
            heart_enlargement: 1.0,
            noise_sigma: DEFAULT_NOISE_SIGMA,
        }
    }

    fn validate(&self) -> Result<()> {
        let (w, h, d) = self.dims;
        if w < MIN_DIMS.0 || h < MIN_DIMS.1 || d < MIN_DIMS.2 {
            return Err(Error::PhantomTooSmall {
                dims: self.dims,
                min: MIN_DIMS,
            });
        }
        let checks = [
            ("calcification", self.calcification, 0.0, 1.0),
            (
                "vertebral_hu_reduction",
                self.vertebral_hu_reduction,
                0.0,
                300.0,
            ),
            ("emphysema_fraction", self.emphysema_fraction, 0.0, 1.0),
            ("heart_enlargement", self.heart_enlargement, 1.0, 2.0),
            ("noise_sigma", self.noise_sigma, 0.0, 100.0),
        ];
        for (name, v, lo, hi) in checks {
            if !(lo..=hi).contains(&v) {
                return Err(Error::InvalidPhantomSpec(format!(
                    "{name} = {v} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

// Baseline tissue HU levels.
const HU_AIR: f64 = -1000.0;
const HU_SOFT: f64 = 30.0;
const HU_SPINE: f64 = 250.0;
const HU_AORTA: f64 = 80.0;
const HU_HEART: f64 = 65.0;
const HU_EPI_FAT: f64 = -90.0;
const HU_LUNG: f64 = -820.0;
const HU_MUSCLE: f64 = 50.0;
const HU_BODY_FAT: f64 = -100.0;

#[derive(Clone, Copy, PartialEq)]
enum Tissue {
    Air,
    Soft,
    Anatomy(Anatomy),
}

/// Anatomy assignment for a voxel center (relative coords in [0,1]).
/// First match in priority order wins, so masks are disjoint by construction.
fn classify(rx: f64, ry: f64, rz: f64, heart_scale: f64) -> Tissue {
    let ell = |cx: f64, cy: f64, cz: f64, ax: f64, ay: f64, az: f64| -> f64 {
        let dx = (rx - cx) / ax;
        let dy = (ry - cy) / ay;
        let dz = (rz - cz) / az;
        dx * dx + dy * dy + dz * dz
    };
    // spinal column: box at the back
    if (0.45..0.55).contains(&rx) && (0.78..0.92).contains(&ry) {
        return Tissue::Anatomy(Anatomy::SpinalColumn);
    }
    // aorta: vertical cylinder
    let da = {
        let dx = (rx - 0.5) / 0.055;
        let dy = (ry - 0.64) / 0.055;
        dx * dx + dy * dy
    };
    if da <= 1.0 {
        return Tissue::Anatomy(Anatomy::Aorta);
    }
    // heart and its fat shell
    let s = heart_scale;
    let heart = ell(0.48, 0.45, 0.5, 0.14 * s, 0.13 * s, 0.38 * s);
    if heart <= 1.0 {
        return Tissue::Anatomy(Anatomy::Heart);
    }
    let shell = ell(0.48, 0.45, 0.5, 0.175 * s, 0.165 * s, 0.44 * s);
    if shell <= 1.0 {
        return Tissue::Anatomy(Anatomy::EpicardialFat);
    }
    // lungs: two ellipsoids
    if ell(0.26, 0.42, 0.5, 0.16, 0.26, 0.45) <= 1.0
        || ell(0.74, 0.42, 0.5, 0.16, 0.26, 0.45) <= 1.0
    {
        return Tissue::Anatomy(Anatomy::Lungs);
    }
    // body outline in-slice
    let body = {
        let dx = (rx - 0.5) / 0.46;
        let dy = (ry - 0.5) / 0.46;
        (dx * dx + dy * dy).sqrt()
    };
    if body > 1.0 {
        return Tissue::Air;
    }
    if body > 0.92 {
        return Tissue::Anatomy(Anatomy::BodyFat);
    }
    if body > 0.80 {
        return Tissue::Anatomy(Anatomy::Muscle);
    }
    Tissue::Soft
}

fn base_hu(t: Tissue) -> f64 {
    match t {
        Tissue::Air => HU_AIR,
        Tissue::Soft => HU_SOFT,
        Tissue::Anatomy(Anatomy::SpinalColumn) => HU_SPINE,
        Tissue::Anatomy(Anatomy::Aorta) => HU_AORTA,
        Tissue::Anatomy(Anatomy::Heart) => HU_HEART,
        Tissue::Anatomy(Anatomy::EpicardialFat) => HU_EPI_FAT,
        Tissue::Anatomy(Anatomy::Lungs) => HU_LUNG,
        Tissue::Anatomy(Anatomy::Muscle) => HU_MUSCLE,
        Tissue::Anatomy(Anatomy::BodyFat) => HU_BODY_FAT,
    }
}

/// Generate one phantom study. Pure function of the spec.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<StudyRecord> {
    spec.validate()?;
    let (w, h, d) = spec.dims;
    let n = w * h * d;
    let heart_scale = if spec.case_flag {
        spec.heart_enlargement.cbrt()
    } else {
        1.0
    };

    // Pass 1: tissue assignment + base HU + noise, fixed scan order.
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x9e37_79b9));
    let noise = Normal::new(0.0, spec.noise_sigma.max(1e-12)).expect("valid sigma");
    let mut hu = vec![0.0f64; n];
    let mut tissue = vec![Tissue::Air; n];
    let mut idx = 0usize;
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let rx = (x as f64 + 0.5) / w as f64;
                let ry = (y as f64 + 0.5) / h as f64;
                let rz = (z as f64 + 0.5) / d as f64;
                let t = classify(rx, ry, rz, heart_scale);
                tissue[idx] = t;
                hu[idx] = base_hu(t) + noise.sample(&mut noise_rng);
                idx += 1;
            }
        }
    }

    let in_anatomy =
        |tissue: &[Tissue], i: usize, a: Anatomy| tissue[i] == Tissue::Anatomy(a);

    if spec.case_flag {
        // Vertebral HU reduction.
        for i in 0..n {
            if in_anatomy(&tissue, i, Anatomy::SpinalColumn) {
                hu[i] -= spec.vertebral_hu_reduction;
            }
        }
        // Emphysema: seeded Bernoulli over lung voxels in scan order.
        let mut emph_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0xe3a1));
        let emph_noise = Normal::new(0.0, 8.0).expect("sigma");
        for i in 0..n {
            if in_anatomy(&tissue, i, Anatomy::Lungs)
                && emph_rng.gen::<f64>() < spec.emphysema_fraction
            {
                hu[i] = (-1000.0_f64 + emph_noise.sample(&mut emph_rng)).min(-960.0);
            }
        }
        // Calcified foci in aorta and heart: bright 2x2 in-slice patches.
        let mut calc_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0xca1c));
        let targets: Vec<usize> = (0..n)
            .filter(|&i| {
                in_anatomy(&tissue, i, Anatomy::Aorta) || in_anatomy(&tissue, i, Anatomy::Heart)
            })
            .collect();
        if !targets.is_empty() {
            let n_foci = ((spec.calcification * targets.len() as f64) / 24.0).round() as usize;
            for _ in 0..n_foci {
                let seed_idx = targets[calc_rng.gen_range(0..targets.len())];
                let z = seed_idx / (w * h);
                let rem = seed_idx % (w * h);
                let y = rem / w;
                let x = rem % w;
                let peak = 450.0 + calc_rng.gen::<f64>() * 300.0;
                for dy in 0..2usize {
                    for dx in 0..2usize {
                        let (xx, yy) = (x + dx, y + dy);
                        if xx < w && yy < h {
                            let j = xx + w * (yy + h * z);
                            if tissue[j] == tissue[seed_idx] {
                                hu[j] = peak;
                            }
                        }
                    }
                }
            }
        }
    }

    let data: Vec<i16> = hu
        .iter()
        .map(|&v| v.round().clamp(-1024.0, 3071.0) as i16)
        .collect();
    let volume = Volume::new(spec.dims, spec.spacing, data)?;

    let masks: Vec<AnatomyMask> = ALL_ANATOMIES
        .iter()
        .map(|&a| {
            let bits: Vec<u8> = tissue
                .iter()
                .map(|&t| u8::from(t == Tissue::Anatomy(a)))
                .collect();
            AnatomyMask::new(a, spec.dims, bits)
        })
        .collect::<Result<_>>()?;

    let mut meta_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0x5eed));
    let censor_days = meta_rng.gen_range(1100..1825);
    StudyRecord::new(
        format!(
            "phantom-{:016x}-{}",
            spec.seed,
            if spec.case_flag { "case" } else { "ctrl" }
        ),
        volume,
        masks,
        u8::from(spec.case_flag),
        censor_days,
        0,
    )
}

/// A balanced matched cohort: `n_pairs` cases plus `n_pairs` controls.
/// Case signature strengths are drawn per pair from documented ranges;
/// controls carry no injected signatures. Matched pairs share a
/// `match_group` and censor time.
pub fn generate_cohort(
    n_pairs: usize,
    dims: (usize, usize, usize),
    seed: u64,
) -> Result<Vec<StudyRecord>> {
    let mut records = Vec::with_capacity(2 * n_pairs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for pair in 0..n_pairs {
        let case_seed = rng.gen::<u64>();
        let ctrl_seed = rng.gen::<u64>();
        let case_spec = PhantomSpec {
            case_flag: true,
            calcification: 0.5 + 0.4 * rng.gen::<f64>(),
            vertebral_hu_reduction: 80.0 + 70.0 * rng.gen::<f64>(),
            emphysema_fraction: 0.25 + 0.20 * rng.gen::<f64>(),
            heart_enlargement: 1.2 + 0.2 * rng.gen::<f64>(),
            ..PhantomSpec::control(case_seed, dims)
        };
        let ctrl_spec = PhantomSpec::control(ctrl_seed, dims);
        let mut case = generate_phantom(&case_spec)?;
        let mut ctrl = generate_phantom(&ctrl_spec)?;
        case.id = format!("case-{pair:03}");
        ctrl.id = format!("ctrl-{pair:03}");
        case.match_group = pair as u32;
        ctrl.match_group = pair as u32;
        ctrl.censor_days = case.censor_days;
        records.push(case);
        records.push(ctrl);
    }
    Ok(records)
}
