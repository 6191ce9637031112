use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::family::{OrientedBox, PlaneMap};
use crate::geometry::{cloud_diameter, DiagnosticReport, DiskDomain, PlanePoint, Verdict};
use crate::{par, rng};

/// A finite word over the generators, letters `1..=2m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolWord(Vec<usize>);

impl SymbolWord {
    pub fn new(letters: Vec<usize>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::InvalidArgument("symbol word must be nonempty".into()));
        }
        if letters.contains(&0) {
            return Err(Error::InvalidArgument("symbols start at 1".into()));
        }
        Ok(SymbolWord(letters))
    }

    pub fn constant(letter: usize, len: usize) -> Result<Self> {
        SymbolWord::new(vec![letter; len])
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for SymbolWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        f.write_str(&s.join(","))
    }
}

impl FromStr for SymbolWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| Error::Parse(format!("symbol {p:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        SymbolWord::new(letters)
    }
}

/// `f_{ω₁} ∘ … ∘ f_{ωₙ}(x̄)` with a certified bound on the diameter of
/// `f_{ω₁} ∘ … ∘ f_{ωₙ}(X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodingPoint {
    pub point: PlanePoint,
    pub radius: f64,
}

fn letter_map(maps: &[Arc<dyn PlaneMap>], letter: usize) -> Result<&Arc<dyn PlaneMap>> {
    maps.get(letter.wrapping_sub(1))
        .ok_or_else(|| Error::InvalidArgument(format!("symbol {letter} outside 1..={}", maps.len())))
}

/// Evaluates the coding map on a finite word, starting from the center of
/// `domain`. The bound is the smaller of the composed box enclosure of `X`
/// and the Lipschitz product times `diam(X)`; an error if it is not below
/// `tol`.
pub fn coding_point(
    maps: &[Arc<dyn PlaneMap>],
    domain: &DiskDomain,
    word: &SymbolWord,
    tol: f64,
) -> Result<CodingPoint> {
    let mut x = domain.center;
    let mut bx = OrientedBox::around_disk(domain);
    let mut lip = 1.0;
    for &l in word.letters().iter().rev() {
        let f = letter_map(maps, l)?;
        x = f.apply(x);
        bx = f.map_box(&bx);
        lip *= f.lipschitz();
    }
    let radius = bx.diameter().min(lip * domain.diameter());
    if radius >= tol {
        return Err(Error::Inconclusive(format!(
            "word of length {} only certifies diameter {radius:.3e}, need < {tol:.3e}",
            word.len()
        )));
    }
    Ok(CodingPoint { point: x, radius })
}

/// Diameter of the image of `∂X` under the forward compositions
/// `f_{ωⱼ} ∘ … ∘ f_{ω₁}`, `j = 0..=n`.
pub fn word_profile(
    maps: &[Arc<dyn PlaneMap>],
    domain: &DiskDomain,
    word: &SymbolWord,
    boundary: usize,
) -> Result<Vec<f64>> {
    let mut cloud = domain.boundary(boundary);
    let mut out = Vec::with_capacity(word.len() + 1);
    out.push(cloud_diameter(&cloud));
    for &l in word.letters() {
        let f = letter_map(maps, l)?;
        for p in cloud.iter_mut() {
            *p = f.apply(*p);
        }
        out.push(cloud_diameter(&cloud));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct HyperbolicityScan {
    pub report: DiagnosticReport,
    /// Largest diameter over all words at each depth `0..=depth`.
    pub max_profile: Vec<f64>,
    /// Mean diameter at each depth.
    pub mean_profile: Vec<f64>,
}

/// Diameters of `f_{ω₁} ∘ … ∘ f_{ωₙ}(X)` for uniformly random words.
///
/// The words are i.i.d., so composing in forward order gives the same
/// distribution at every depth while letting one pass record the whole
/// profile. PASS iff the largest diameter at `depth` is below
/// `1e-3 · diam(X)`.
pub fn weak_hyperbolicity_scan(
    maps: &[Arc<dyn PlaneMap>],
    domain: &DiskDomain,
    words: usize,
    depth: usize,
    seed: u64,
) -> HyperbolicityScan {
    const BOUNDARY: usize = 256;
    let profiles = par::map_indices(words, |w| {
        let mut r = rng::stream(seed, w as u64);
        let letters = (0..depth).map(|_| r.random_range(1..=maps.len())).collect();
        match SymbolWord::new(letters) {
            Ok(word) => word_profile(maps, domain, &word, BOUNDARY).expect("letters in range"),
            Err(_) => vec![domain.diameter()],
        }
    });
    let len = depth + 1;
    let mut max_profile = vec![0.0f64; len];
    let mut sums = vec![0.0f64; len];
    for p in &profiles {
        for (j, &d) in p.iter().enumerate() {
            max_profile[j] = max_profile[j].max(d);
            sums[j] += d;
        }
    }
    let mean_profile: Vec<f64> = sums.iter().map(|s| s / words.max(1) as f64).collect();
    let threshold = 1e-3 * domain.diameter();
    let worst = *max_profile.last().unwrap_or(&f64::INFINITY);
    let mut report = DiagnosticReport::new(
        "weak_hyperbolicity",
        Verdict::from_bool(words > 0 && worst < threshold),
        words as u64,
        seed,
    )
    .with_stat("max_diameter", worst)
    .with_stat("mean_diameter", *mean_profile.last().unwrap_or(&f64::INFINITY))
    .with_stat("threshold", threshold)
    .with_stat("depth", depth as f64);
    for j in [10usize, 50, 100] {
        if j < len {
            report.set(&format!("max_diameter_at_{j}"), max_profile[j]);
        }
    }
    HyperbolicityScan { report, max_profile, mean_profile }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attractor::Hutchinson;
    use crate::family::{generators, AffineMap, FamilyConfig, FiberMaps, PlateauFamily};
    use crate::geometry::{GridGeometry, GridSet, Mat2};

    fn setup() -> (PlateauFamily, Vec<Arc<dyn PlaneMap>>) {
        let p = PlateauFamily::new(FamilyConfig::default()).unwrap();
        let fam: Arc<dyn FiberMaps> = Arc::new(p.clone());
        (p, generators(&fam))
    }

    #[test]
    fn word_parsing() {
        let w: SymbolWord = "1, 2,4".parse().unwrap();
        assert_eq!(w.letters(), &[1, 2, 4]);
        assert_eq!(w.to_string(), "1,2,4");
        assert!("".parse::<SymbolWord>().is_err());
        assert!("0,1".parse::<SymbolWord>().is_err());
    }

    #[test]
    fn constant_words_hit_fixed_points() {
        let (p, maps) = setup();
        let dom = p.config().domain;
        // the weak generator needs a long word: diameters decay like n^{-1/2}
        let c = coding_point(&maps, &dom, &SymbolWord::constant(1, 20_000).unwrap(), 2e-3).unwrap();
        assert!(c.point.dist(p.config().x0) <= c.radius);
        let t2 = p.config().t[1];
        let c = coding_point(&maps, &dom, &SymbolWord::constant(2, 300).unwrap(), 1e-9).unwrap();
        assert!(c.point.dist(p.fixed_point(t2).unwrap()) < 1e-9);
        assert!(coding_point(&maps, &dom, &SymbolWord::constant(1, 5).unwrap(), 1e-6).is_err());
        assert!(coding_point(&maps, &dom, &SymbolWord::constant(5, 5).unwrap(), 1.0).is_err());
    }

    #[test]
    fn coding_points_lie_in_the_attractor() {
        let (p, maps) = setup();
        let dom = p.config().domain;
        let geom = GridGeometry::for_disk(&dom, 128);
        let run = Hutchinson::new(maps.clone(), true).iterate(&GridSet::from_disk(geom, &dom), 0.5 * geom.h, 400);
        let tol = 1e-4;
        let k = run.set.dilate(tol + geom.h);
        let mut r = rng::stream(11, 0);
        let base: Vec<usize> = (0..300).map(|_| r.random_range(1..=4)).collect();
        for shift in 0..20 {
            let mut letters = base.clone();
            letters.rotate_left(shift * 5);
            let c = coding_point(&maps, &dom, &SymbolWord::new(letters).unwrap(), tol).unwrap();
            assert!(k.contains_point(c.point));
        }
    }

    #[test]
    fn default_family_is_weakly_hyperbolic() {
        let (p, maps) = setup();
        let scan = weak_hyperbolicity_scan(&maps, &p.config().domain, 200, 200, 1);
        assert!(scan.report.passed(), "{}", scan.report);
        assert_eq!(scan.max_profile.len(), 201);
    }

    #[test]
    fn weak_word_decays_slowly() {
        let (p, maps) = setup();
        let dom = p.config().domain;
        let weak = word_profile(&maps, &dom, &SymbolWord::constant(1, 400).unwrap(), 128).unwrap();
        let strong = word_profile(&maps, &dom, &SymbolWord::constant(2, 400).unwrap(), 128).unwrap();
        assert!(weak.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(weak[400] < weak[0] && weak[400] > 1e3 * strong[400]);
        // sub-geometric: the one-step ratio tends to 1
        assert!(weak[400] / weak[399] > 0.99);
    }

    #[test]
    fn isometry_is_not_weakly_hyperbolic() {
        let dom = DiskDomain { center: PlanePoint::ORIGIN, radius: 1.0 };
        let rot: Arc<dyn PlaneMap> = Arc::new(AffineMap::new(Mat2::rotation(0.3), PlanePoint::ORIGIN));
        let half: Arc<dyn PlaneMap> = Arc::new(AffineMap::similarity(0.5, PlanePoint::ORIGIN));
        let scan = weak_hyperbolicity_scan(&[rot.clone(), rot.clone()], &dom, 50, 40, 2);
        assert!((scan.report.stat("max_diameter").unwrap() - 2.0).abs() < 1e-3);
        assert!(!scan.report.passed());
        // one isometry among contractions still lets some words stay large
        let scan = weak_hyperbolicity_scan(&[rot, half], &dom, 50, 5, 2);
        assert!(!scan.report.passed());
    }
}
