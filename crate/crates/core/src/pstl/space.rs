use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Direction, ParamKind, Polarity, PstlError, PstlFormula, Valuation};
use crate::stl::{parse_pstl, robustness, EvalError, Formula, Signal};

const ORDER_EPS: f64 = 1e-12;

/// `ν1 ⪯ ν2`: every parameter of `ν1` is on the weaker side of (or equal to) `ν2`.
pub fn valuation_leq(nu1: &Valuation, nu2: &Valuation, pol: &Polarity) -> Result<bool, PstlError> {
    if nu1.len() != nu2.len() {
        return Err(PstlError::MismatchedParameters);
    }
    let mut leq = true;
    for (name, v1) in nu1.iter() {
        let v2 = nu2.get(name).ok_or(PstlError::MismatchedParameters)?;
        let d = pol.get(name).ok_or(PstlError::MismatchedParameters)?;
        leq &= d.sign() * (v1 - v2) <= ORDER_EPS;
    }
    Ok(leq)
}

/// Whether `phi1` is weaker than (or equal to) `phi2`, both instances of the space's template.
pub fn weaker_than(phi1: &Formula<f64>, phi2: &Formula<f64>, space: &RequirementSpace) -> Result<bool, PstlError> {
    let nu1 = space.formula.match_instance(phi1)?;
    let nu2 = space.formula.match_instance(phi2)?;
    valuation_leq(&nu1, &nu2, &space.polarity)
}

fn defined_robustness(f: &Formula<f64>, s: &Signal<f64>, index: usize) -> Result<f64, PstlError> {
    let r = robustness(f, s, index)?;
    if !r.defined {
        return Err(EvalError::Undefined {
            needed: f.horizon_steps(s.sample_period()),
            available: s.len() - 1 - index,
        }
        .into());
    }
    Ok(r.value)
}

/// `ρ(φ2) − ρ(φ1)`; positive when `phi2` is the weaker formula.
pub fn degree_of_weakening(
    phi1: &Formula<f64>,
    phi2: &Formula<f64>,
    s: &Signal<f64>,
    index: usize,
) -> Result<f64, PstlError> {
    Ok(defined_robustness(phi2, s, index)? - defined_robustness(phi1, s, index)?)
}

/// `ρ(φ1) − ρ(φ2)`; positive when `phi1` is the weaker formula.
pub fn degree_of_strengthening(
    phi1: &Formula<f64>,
    phi2: &Formula<f64>,
    s: &Signal<f64>,
    index: usize,
) -> Result<f64, PstlError> {
    Ok(defined_robustness(phi1, s, index)? - defined_robustness(phi2, s, index)?)
}

/// `(index, ν)` lies in the bounded validity domain: `φ(ν)` holds and `ν_min ⪯ ν ⪯ ν_opt`.
pub fn in_validity_domain(
    nu: &Valuation,
    phi: &PstlFormula,
    space: &RequirementSpace,
    s: &Signal<f64>,
    index: usize,
) -> Result<bool, PstlError> {
    let holds = defined_robustness(&phi.instantiate(nu)?, s, index)? >= 0.0;
    Ok(holds && space.contains(nu)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub direction: Direction,
}

/// A parametric requirement with its minimal, optimal and current valuations.
#[derive(Debug, Clone)]
pub struct RequirementSpace {
    formula: PstlFormula,
    params: Vec<ParamSpec>,
    polarity: Polarity,
    nu_min: Valuation,
    nu_opt: Valuation,
    nu_curr: Valuation,
}

impl RequirementSpace {
    pub fn new(
        formula: PstlFormula,
        polarity: Polarity,
        nu_min: Valuation,
        nu_opt: Valuation,
        nu_curr: Valuation,
    ) -> Result<Self, PstlError> {
        let mut params = Vec::new();
        for (name, kind) in formula.parameters()? {
            let direction = polarity
                .get(&name)
                .ok_or_else(|| PstlError::InvalidSpace(format!("no polarity for `${name}`")))?;
            for (label, nu) in [("minimal", &nu_min), ("optimal", &nu_opt), ("current", &nu_curr)] {
                if nu.get(&name).is_none() {
                    return Err(PstlError::InvalidSpace(format!("{label} valuation lacks `${name}`")));
                }
            }
            params.push(ParamSpec { name, kind, direction });
        }
        for nu in [&nu_min, &nu_opt, &nu_curr] {
            if nu.len() != params.len() {
                return Err(PstlError::InvalidSpace("valuation names a parameter absent from the formula".into()));
            }
        }
        let space = Self { formula, params, polarity, nu_min, nu_opt, nu_curr };
        if !space.contains(&space.nu_curr)? {
            return Err(PstlError::InvalidSpace("need minimal ⪯ current ⪯ optimal".into()));
        }
        // a well-formed instantiation at both ends
        space.phi_min()?;
        space.phi_opt()?;
        Ok(space)
    }

    pub fn formula(&self) -> &PstlFormula {
        &self.formula
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn polarity(&self) -> &Polarity {
        &self.polarity
    }

    pub fn nu_min(&self) -> &Valuation {
        &self.nu_min
    }

    pub fn nu_opt(&self) -> &Valuation {
        &self.nu_opt
    }

    pub fn nu_curr(&self) -> &Valuation {
        &self.nu_curr
    }

    pub fn instantiate(&self, nu: &Valuation) -> Result<Formula<f64>, PstlError> {
        self.formula.instantiate(nu)
    }

    pub fn phi_min(&self) -> Result<Formula<f64>, PstlError> {
        self.instantiate(&self.nu_min)
    }

    pub fn phi_opt(&self) -> Result<Formula<f64>, PstlError> {
        self.instantiate(&self.nu_opt)
    }

    pub fn phi_curr(&self) -> Result<Formula<f64>, PstlError> {
        self.instantiate(&self.nu_curr)
    }

    /// `ν_min ⪯ ν ⪯ ν_opt`.
    pub fn contains(&self, nu: &Valuation) -> Result<bool, PstlError> {
        Ok(valuation_leq(&self.nu_min, nu, &self.polarity)? && valuation_leq(nu, &self.nu_opt, &self.polarity)?)
    }

    pub fn set_current(&mut self, nu: Valuation) -> Result<(), PstlError> {
        if !self.contains(&nu)? {
            return Err(PstlError::InvalidSpace(format!("valuation {nu} outside [minimal, optimal]")));
        }
        self.nu_curr = nu;
        Ok(())
    }

    pub fn is_optimal(&self) -> bool {
        self.params.iter().all(|p| {
            let (c, o) = (self.nu_curr.get(&p.name).unwrap(), self.nu_opt.get(&p.name).unwrap());
            (c - o).abs() <= 1e-9
        })
    }

    /// Numeric range `[lo, hi]` a parameter may take between two valuations.
    pub fn range_between(&self, name: &str, a: &Valuation, b: &Valuation) -> Option<(f64, f64)> {
        let (x, y) = (a.get(name)?, b.get(name)?);
        Some((x.min(y), x.max(y)))
    }

    /// Empirically checks each declared polarity: moving a parameter in its
    /// strengthening direction never raises robustness on random signals.
    pub fn check_polarity(&self, period: f64, trials: usize, seed: u64) -> Result<(), PstlError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vars = self.formula.variables();
        let h = self.phi_min()?.horizon_steps(period).max(self.phi_opt()?.horizon_steps(period));
        let (lo, hi) = self.constant_range();
        for p in &self.params {
            let (a, b) = self.range_between(&p.name, &self.nu_min, &self.nu_opt).unwrap();
            if b - a <= 0.0 {
                continue;
            }
            for _ in 0..trials {
                let mut weak = self.nu_curr.clone();
                let mut strong = self.nu_curr.clone();
                let (x, y) = (rng.gen_range(a..=b), rng.gen_range(a..=b));
                let (small, large) = (x.min(y), x.max(y));
                let (w, s) = match p.direction {
                    Direction::StrengthensWhenIncreased => (small, large),
                    Direction::StrengthensWhenDecreased => (large, small),
                };
                weak.set(&p.name, w);
                strong.set(&p.name, s);
                let samples = (0..=h)
                    .map(|_| vars.iter().map(|_| rng.gen_range(lo..=hi)).collect())
                    .collect();
                let sig = Signal::new(period, 0.0, vars.clone(), samples).expect("well-formed random signal");
                let rw = robustness(&self.instantiate(&weak)?, &sig, 0)?.value;
                let rs = robustness(&self.instantiate(&strong)?, &sig, 0)?.value;
                if rs > rw + 1e-9 {
                    return Err(PstlError::InvalidSpace(format!(
                        "declared polarity of `${}` contradicted: weaker value {w} gives robustness {rw}, stronger {s} gives {rs}",
                        p.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Range for random signal values, wide enough to straddle every threshold.
    fn constant_range(&self) -> (f64, f64) {
        let mut vals: Vec<f64> = Vec::new();
        for nu in [&self.nu_min, &self.nu_opt] {
            if let Ok(f) = self.instantiate(nu) {
                collect_bounds(&f, &mut vals);
            }
        }
        let lo = vals.iter().copied().fold(0.0, f64::min);
        let hi = vals.iter().copied().fold(0.0, f64::max);
        let pad = (hi - lo).max(1.0);
        (lo - pad, hi + pad)
    }

    pub fn from_json_str(text: &str) -> Result<Self, PstlError> {
        let file: RequirementSpaceFile = serde_json::from_str(text)?;
        file.build()
    }

    pub fn from_path(path: &Path) -> Result<Self, PstlError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_file(&self) -> RequirementSpaceFile {
        RequirementSpaceFile {
            formula: self.formula.to_string(),
            parameters: self
                .params
                .iter()
                .map(|p| ParamEntry {
                    name: p.name.clone(),
                    kind: Some(p.kind),
                    polarity: p.direction,
                    min: self.nu_min.get(&p.name).unwrap(),
                    opt: self.nu_opt.get(&p.name).unwrap(),
                    initial: self.nu_curr.get(&p.name),
                })
                .collect(),
        }
    }
}

fn collect_bounds(f: &Formula<f64>, out: &mut Vec<f64>) {
    match f {
        Formula::Pred(p) => out.push(p.bound),
        Formula::Not(x) | Formula::Eventually(_, x) | Formula::Globally(_, x) => collect_bounds(x, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Until(_, a, b) => {
            collect_bounds(a, out);
            collect_bounds(b, out);
        }
    }
}

/// On-disk form of a requirement space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequirementSpaceFile {
    pub formula: String,
    pub parameters: Vec<ParamEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ParamKind>,
    pub polarity: Direction,
    pub min: f64,
    pub opt: f64,
    /// Starting value; defaults to `opt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<f64>,
}

impl RequirementSpaceFile {
    pub fn build(&self) -> Result<RequirementSpace, PstlError> {
        let formula = parse_pstl(&self.formula)?;
        let kinds = formula.parameters()?;
        let (mut pol, mut lo, mut op, mut cur) = (Polarity::new(), Valuation::new(), Valuation::new(), Valuation::new());
        for p in &self.parameters {
            if let (Some(declared), Some((_, actual))) = (p.kind, kinds.iter().find(|(n, _)| *n == p.name)) {
                if declared != *actual {
                    return Err(PstlError::InvalidSpace(format!("`${}` declared {declared:?} but used as {actual:?}", p.name)));
                }
            }
            pol = pol.with(&p.name, p.polarity);
            lo.set(&p.name, p.min);
            op.set(&p.name, p.opt);
            cur.set(&p.name, p.initial.unwrap_or(p.opt));
        }
        RequirementSpace::new(formula, pol, lo, op, cur)
    }
}
