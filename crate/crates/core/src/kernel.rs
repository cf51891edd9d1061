//! Exact solutions of the cycle loss on finite spaces and the right action of
//! the automorphism group on them.
//!
//! An exact solution is a mass-preserving bijection `G: X -> Y` together with
//! `F = G^-1`. An automorphism `phi` acts by `(G, F) -> (G o phi, phi^-1 o F)`.
//! Because the action is on the right, composing two actions reverses order:
//! `act(phi, act(psi, s)) = act(psi o phi, s)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{tabular_from_indices, MeasurableMap};
use crate::probspace::FiniteSpace;

/// Default tolerance for deciding that two masses are equal.
pub const MASS_TOL: f64 = 1e-9;

/// Largest space handled by exhaustive enumeration (9! bijections).
pub const MAX_ATOMS: usize = 9;

/// A permutation stored as its image table.
pub type Perm = Vec<usize>;

fn guard(space: &FiniteSpace) -> Result<()> {
    if space.len() > MAX_ATOMS {
        return Err(Error::TooLarge(space.len()));
    }
    Ok(())
}

/// Next permutation in lexicographic order, or `false` after the last.
fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// All bijections `i -> p[i]` with `|to[p[i]] - from[i]| <= tol`, in
/// lexicographic order.
fn matching_perms(from: &[f64], to: &[f64], tol: f64) -> Vec<Perm> {
    if from.len() != to.len() {
        return Vec::new();
    }
    let mut p: Perm = (0..from.len()).collect();
    let mut out = Vec::new();
    loop {
        if p.iter().enumerate().all(|(i, &j)| (to[j] - from[i]).abs() <= tol) {
            out.push(p.clone());
        }
        if !next_permutation(&mut p) {
            break;
        }
    }
    out
}

/// Groups atoms whose masses chain together within `tol` after sorting.
pub fn mass_classes(space: &FiniteSpace, tol: f64) -> Vec<Vec<usize>> {
    let m = space.masses();
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| m[a].total_cmp(&m[b]).then(a.cmp(&b)));
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match classes.last_mut() {
            Some(c) if (m[i] - m[*c.last().unwrap()]).abs() <= tol => c.push(i),
            _ => classes.push(vec![i]),
        }
    }
    classes
}

/// `prod_k m_k!` over mass classes.
pub fn automorphism_count(space: &FiniteSpace, tol: f64) -> u64 {
    mass_classes(space, tol)
        .iter()
        .map(|c| (1..=c.len() as u64).product::<u64>())
        .product()
}

fn perm_map(from: &FiniteSpace, to: &FiniteSpace, p: Perm) -> MeasurableMap {
    tabular_from_indices(from.labels(), to.labels(), p).expect("in-range permutation")
}

fn invert(p: &[usize]) -> Perm {
    let mut inv = vec![0; p.len()];
    for (i, &j) in p.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

/// Mass-preserving self-bijections of `space`, identity first.
pub fn enumerate_automorphisms(space: &FiniteSpace, tol: f64) -> Result<Vec<MeasurableMap>> {
    guard(space)?;
    Ok(matching_perms(space.masses(), space.masses(), tol)
        .into_iter()
        .map(|p| perm_map(space, space, p))
        .collect())
}

/// An exact solution `(G, F)` with `F = G^-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub g: MeasurableMap,
    pub f: MeasurableMap,
}

impl Solution {
    fn from_perm(x: &FiniteSpace, y: &FiniteSpace, p: Perm) -> Solution {
        let inv = invert(&p);
        Solution {
            g: perm_map(x, y, p),
            f: perm_map(y, x, inv),
        }
    }

    /// Image table of `G`.
    pub fn assignment(&self) -> &[usize] {
        self.g.as_tabular().expect("solutions are tabular").assignment()
    }
}

/// All exact solutions for `(X, Y)`, sorted by the assignment of `G`.
pub fn enumerate_isomorphisms(x: &FiniteSpace, y: &FiniteSpace, tol: f64) -> Result<Vec<Solution>> {
    guard(x)?;
    guard(y)?;
    Ok(matching_perms(x.masses(), y.masses(), tol)
        .into_iter()
        .map(|p| Solution::from_perm(x, y, p))
        .collect())
}

/// The permutation realized by `phi` on `x`, if it is an automorphism.
fn automorphism_perm(phi: &MeasurableMap, x: &FiniteSpace, tol: f64) -> Result<Perm> {
    let table = phi
        .to_table(x)
        .map_err(|e| Error::NotAutomorphism(format!("not a map on X: {e}")))?;
    if table.codomain() != x.labels() {
        return Err(Error::NotAutomorphism("codomain differs from X".into()));
    }
    if !table.is_bijection() {
        return Err(Error::NotAutomorphism("not a bijection".into()));
    }
    let m = x.masses();
    for (i, &j) in table.assignment().iter().enumerate() {
        if (m[i] - m[j]).abs() > tol {
            return Err(Error::NotAutomorphism(format!(
                "atom `{}` ({}) sent to `{}` ({})",
                x.labels()[i],
                m[i],
                x.labels()[j],
                m[j]
            )));
        }
    }
    Ok(table.assignment().to_vec())
}

fn solution_perm(s: &Solution, x: &FiniteSpace, y: &FiniteSpace, tol: f64) -> Result<Perm> {
    let bad = |msg: &str| Error::NotExactSolution(msg.into());
    let g = s.g.to_table(x).map_err(|_| bad("G is not a table on X"))?;
    let f = s.f.to_table(y).map_err(|_| bad("F is not a table on Y"))?;
    if g.codomain() != y.labels() || f.codomain() != x.labels() {
        return Err(bad("label sets differ"));
    }
    if !g.is_bijection() {
        return Err(bad("G is not a bijection"));
    }
    if f.assignment() != invert(g.assignment()).as_slice() {
        return Err(bad("F is not the inverse of G"));
    }
    for (i, &j) in g.assignment().iter().enumerate() {
        if (x.masses()[i] - y.masses()[j]).abs() > tol {
            return Err(bad("G does not preserve mass"));
        }
    }
    Ok(g.assignment().to_vec())
}

/// `(G o phi, phi^-1 o F)` on permutation tables.
fn act_perm(phi: &[usize], g: &[usize]) -> Perm {
    phi.iter().map(|&j| g[j]).collect()
}

/// The right action `(G, F) -> (G o phi, phi^-1 o F)`, returned as tables.
pub fn act(phi: &MeasurableMap, s: &Solution, x: &FiniteSpace, y: &FiniteSpace) -> Result<Solution> {
    let p = automorphism_perm(phi, x, MASS_TOL)?;
    let g = solution_perm(s, x, y, MASS_TOL)?;
    Ok(Solution::from_perm(x, y, act_perm(&p, &g)))
}

/// The automorphism `phi = F1 o G2` carrying `s1` to `s2`.
pub fn transporter(s1: &Solution, s2: &Solution, x: &FiniteSpace, y: &FiniteSpace) -> Result<MeasurableMap> {
    let g1 = solution_perm(s1, x, y, MASS_TOL)?;
    let g2 = solution_perm(s2, x, y, MASS_TOL)?;
    let f1 = invert(&g1);
    Ok(perm_map(x, x, g2.iter().map(|&j| f1[j]).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCatalogue {
    pub isomorphisms: Vec<Solution>,
    pub automorphisms: Vec<MeasurableMap>,
    /// `action_table[a][s]` is the index of `act(automorphisms[a], isomorphisms[s])`.
    pub action_table: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeTransitiveReport {
    pub catalogue: KernelCatalogue,
    pub free: bool,
    pub transitive: bool,
    pub orbit_size: usize,
    pub group_size: usize,
    pub iso_empty: bool,
}

impl FreeTransitiveReport {
    pub fn verdict(&self) -> bool {
        self.free && self.transitive && (self.iso_empty || self.orbit_size == self.group_size)
    }

    pub fn summary(&self) -> String {
        if self.iso_empty {
            return format!(
                "iso_empty: no mass-preserving bijection; |Aut(X)| = {}",
                self.group_size
            );
        }
        format!(
            "|Aut(X)| = {}, |Iso(X,Y)| = {}, orbit size = {}, free = {}, transitive = {}",
            self.group_size,
            self.catalogue.isomorphisms.len(),
            self.orbit_size,
            self.free,
            self.transitive
        )
    }
}

/// Enumerates `Aut(X)` and `Iso(X, Y)`, tabulates the action and checks that
/// it is free and transitive.
pub fn verify_free_transitive(x: &FiniteSpace, y: &FiniteSpace, tol: f64) -> Result<FreeTransitiveReport> {
    guard(x)?;
    guard(y)?;
    let auts = matching_perms(x.masses(), x.masses(), tol);
    let isos = matching_perms(x.masses(), y.masses(), tol);
    let index: HashMap<&[usize], usize> = isos.iter().enumerate().map(|(i, p)| (p.as_slice(), i)).collect();
    let action_table: Vec<Vec<usize>> = auts
        .iter()
        .map(|phi| isos.iter().map(|g| index[act_perm(phi, g).as_slice()]).collect())
        .collect();

    // identity is the first automorphism in lexicographic order
    let free = action_table
        .iter()
        .skip(1)
        .all(|row| row.iter().enumerate().all(|(s, &t)| s != t));
    let mut orbit = vec![false; isos.len()];
    if !isos.is_empty() {
        for row in &action_table {
            orbit[row[0]] = true;
        }
    }
    let orbit_size = orbit.iter().filter(|&&b| b).count();
    let transitive = orbit_size == isos.len();
    let group_size = auts.len();

    Ok(FreeTransitiveReport {
        catalogue: KernelCatalogue {
            isomorphisms: isos.into_iter().map(|p| Solution::from_perm(x, y, p)).collect(),
            automorphisms: auts.into_iter().map(|p| perm_map(x, x, p)).collect(),
            action_table,
        },
        free,
        transitive,
        orbit_size,
        group_size,
        iso_empty: orbit_size == 0,
    })
}
