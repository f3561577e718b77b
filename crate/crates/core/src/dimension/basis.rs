use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};

use super::linalg::{canonicalize, nullspace, rank, solve_full_column_rank};
use super::{DimensionError, DimensionVector, Exponent, Role, VariableDecl};

/// Base dimensions (rows) × declared variables (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionMatrix {
    columns: Vec<VariableDecl>,
    entries: Vec<Vec<Exponent>>,
}

impl DimensionMatrix {
    pub fn new(vars: Vec<VariableDecl>) -> Result<Self, DimensionError> {
        if vars.is_empty() {
            return Err(DimensionError::Empty);
        }
        let mut seen = HashSet::new();
        for v in &vars {
            if !seen.insert(v.name.as_str()) {
                return Err(DimensionError::DuplicateName(v.name.clone()));
            }
        }
        let entries = (0..3)
            .map(|b| vars.iter().map(|v| v.dimension.exponents()[b]).collect())
            .collect();
        Ok(Self { columns: vars, entries })
    }

    pub fn columns(&self) -> &[VariableDecl] {
        &self.columns
    }

    /// Row-major, one row per base dimension (M, L, T).
    pub fn entries(&self) -> &[Vec<Exponent>] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> DimensionVector {
        DimensionVector::from_exponents([self.entries[0][j], self.entries[1][j], self.entries[2][j]])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|v| v.name == name)
    }

    pub fn rank(&self) -> usize {
        rank(&self.entries)
    }

    /// Number of independent dimensionless groups, N − rank.
    pub fn buckingham_count(&self) -> usize {
        self.columns.len() - self.rank()
    }

    fn sub_matrix(&self, cols: &[usize]) -> Vec<Vec<Exponent>> {
        self.entries
            .iter()
            .map(|row| cols.iter().map(|&c| row[c]).collect())
            .collect()
    }

    /// Basis from the rational nullspace of the matrix. One group per free
    /// column of the reduced echelon form, scaled to coprime integers with
    /// the first nonzero exponent positive.
    pub fn nullspace_pi_basis(&self) -> PiBasis {
        let n = self.columns.len();
        let groups = nullspace(&self.entries, n)
            .into_iter()
            .map(|v| {
                let anchor = (0..n).rev().find(|&j| !v[j].is_zero()).map(|j| self.columns[j].name.clone());
                let v = canonicalize(&v);
                let terms = (0..n)
                    .filter(|&j| !v[j].is_zero())
                    .map(|j| (self.columns[j].name.clone(), v[j]))
                    .collect();
                PiGroup { terms, anchor }
            })
            .collect();
        PiBasis::new(self.columns.clone(), Vec::new(), groups)
    }

    /// Repeated-variables method: every non-repeated variable `q` yields the
    /// group `q · Π r_k^{e_k}` with exponents solved so the product is
    /// dimensionless.
    pub fn repeated_vars_pi_basis(&self, repeated: &[&str]) -> Result<PiBasis, DimensionError> {
        let idx = repeated
            .iter()
            .map(|name| {
                self.index_of(name)
                    .ok_or_else(|| DimensionError::UnknownVariable(name.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen = HashSet::new();
        for name in repeated {
            if !seen.insert(*name) {
                return Err(DimensionError::DuplicateName(name.to_string()));
            }
        }
        let r = self.rank();
        if idx.len() != r {
            return Err(DimensionError::RepeatedCount {
                given: idx.len(),
                rank: r,
            });
        }
        let sub = self.sub_matrix(&idx);
        if rank(&sub) != idx.len() {
            return Err(DimensionError::DependentRepeated(
                repeated.iter().map(|s| s.to_string()).collect(),
            ));
        }
        let mut groups = Vec::new();
        for (j, var) in self.columns.iter().enumerate() {
            if idx.contains(&j) {
                continue;
            }
            let rhs: Vec<Exponent> = var.dimension.exponents().iter().map(|e| -e).collect();
            // Full rank of the repeated set equals the matrix rank, so every
            // column lies in its span.
            let k = solve_full_column_rank(&sub, &rhs)
                .ok_or_else(|| DimensionError::DependentRepeated(repeated.iter().map(|s| s.to_string()).collect()))?;
            let mut terms = vec![(var.name.clone(), Exponent::one())];
            terms.extend(
                idx.iter()
                    .zip(k)
                    .filter(|(_, e)| !e.is_zero())
                    .map(|(&c, e)| (self.columns[c].name.clone(), e)),
            );
            groups.push(PiGroup {
                terms,
                anchor: Some(var.name.clone()),
            });
        }
        let repeated_vars = idx.iter().map(|&c| self.columns[c].clone()).collect();
        Ok(PiBasis::new(self.columns.clone(), repeated_vars, groups))
    }
}

/// A dimensionless monomial over declared variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiGroup {
    terms: Vec<(String, Exponent)>,
    anchor: Option<String>,
}

impl PiGroup {
    pub fn new(terms: Vec<(String, Exponent)>, anchor: Option<String>) -> Self {
        let terms = terms.into_iter().filter(|(_, e)| !e.is_zero()).collect();
        Self { terms, anchor }
    }

    /// Nonzero exponents in display order.
    pub fn exponents(&self) -> &[(String, Exponent)] {
        &self.terms
    }

    pub fn exponent(&self, name: &str) -> Exponent {
        self.terms
            .iter()
            .find(|(n, _)| n == name)
            .map_or_else(Exponent::zero, |(_, e)| *e)
    }

    /// The variable this group was built around (the non-repeated variable in
    /// the repeated-variables method, the free column for nullspace groups).
    pub fn anchor(&self) -> Option<&str> {
        self.anchor.as_deref()
    }

    pub fn reciprocal(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(n, e)| (n.clone(), -e)).collect(),
            anchor: self.anchor.clone(),
        }
    }

    /// Net dimension of the monomial given the declarations it refers to.
    pub fn dimension(&self, vars: &[VariableDecl]) -> Result<DimensionVector, DimensionError> {
        self.terms
            .iter()
            .try_fold(DimensionVector::dimensionless(), |acc, (name, e)| {
                let v = vars
                    .iter()
                    .find(|v| &v.name == name)
                    .ok_or_else(|| DimensionError::UnknownVariable(name.clone()))?;
                Ok(acc + v.dimension * *e)
            })
    }

    /// Exponent vector aligned with `names`.
    pub fn exponent_vector(&self, names: &[&str]) -> Vec<Exponent> {
        names.iter().map(|n| self.exponent(n)).collect()
    }

    /// True when both groups have the same exponents, or one is the
    /// reciprocal of the other.
    pub fn equivalent(&self, other: &PiGroup) -> bool {
        let mut names: Vec<&str> = self.terms.iter().chain(&other.terms).map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        let a = self.exponent_vector(&names);
        let b = other.exponent_vector(&names);
        a == b || a.iter().zip(&b).all(|(x, y)| *x == -*y)
    }

    /// Evaluates the monomial with values looked up by name.
    pub fn evaluate<F>(&self, mut lookup: F) -> Result<f64, DimensionError>
    where
        F: FnMut(&str) -> Option<f64>,
    {
        self.terms.iter().try_fold(1.0, |acc, (name, e)| {
            let v = lookup(name).ok_or_else(|| DimensionError::MissingVariable(name.clone()))?;
            Ok(acc * power(name, v, *e)?)
        })
    }

    /// Monomial string such as `a^1 l^1 v_i^-2`.
    pub fn monomial(&self) -> String {
        if self.terms.is_empty() {
            return "1".to_string();
        }
        self.terms
            .iter()
            .map(|(n, e)| format!("{n}^{e}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for PiGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.monomial())
    }
}

fn power(name: &str, base: f64, e: Exponent) -> Result<f64, DimensionError> {
    if e.is_zero() {
        return Ok(1.0);
    }
    if base == 0.0 && e.is_negative() {
        return Err(DimensionError::DegenerateRow(name.to_string()));
    }
    if e.is_integer() {
        let k = e.to_integer().to_i32().expect("exponent fits in i32");
        Ok(base.powi(k))
    } else if base < 0.0 {
        Err(DimensionError::NonRealPower(name.to_string()))
    } else {
        Ok(base.powf(e.to_f64().expect("finite exponent")))
    }
}

#[derive(Clone, Debug, PartialEq)]
struct CompiledGroup {
    terms: Vec<(usize, Exponent)>,
}

/// An ordered set of π groups over a variable declaration list.
#[derive(Clone, Debug, PartialEq)]
pub struct PiBasis {
    variables: Vec<VariableDecl>,
    repeated: Vec<VariableDecl>,
    groups: Vec<PiGroup>,
    compiled: Vec<CompiledGroup>,
}

impl PiBasis {
    fn new(variables: Vec<VariableDecl>, repeated: Vec<VariableDecl>, groups: Vec<PiGroup>) -> Self {
        let compiled = groups.iter().map(|g| compile(g, &variables)).collect();
        Self {
            variables,
            repeated,
            groups,
            compiled,
        }
    }

    pub fn variables(&self) -> &[VariableDecl] {
        &self.variables
    }

    pub fn repeated_vars(&self) -> &[VariableDecl] {
        &self.repeated
    }

    pub fn groups(&self) -> &[PiGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn group_by_anchor(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.anchor() == Some(name))
    }

    /// Groups whose anchor is an output variable.
    pub fn output_groups(&self) -> Vec<usize> {
        self.groups_with_role(Role::Output)
    }

    /// Groups whose anchor is not an output variable.
    pub fn input_groups(&self) -> Vec<usize> {
        (0..self.groups.len()).filter(|i| !self.output_groups().contains(i)).collect()
    }

    fn groups_with_role(&self, role: Role) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| {
                g.anchor()
                    .and_then(|a| self.variables.iter().find(|v| v.name == a))
                    .is_some_and(|v| v.role == role)
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Replaces group `idx` by its reciprocal.
    pub fn with_inverted_group(mut self, idx: usize) -> Result<Self, DimensionError> {
        let g = self.groups.get(idx).ok_or(DimensionError::GroupIndex(idx))?.reciprocal();
        self.compiled[idx] = compile(&g, &self.variables);
        self.groups[idx] = g;
        Ok(self)
    }

    /// Evaluates group `idx` on a value slice aligned with [`Self::variables`].
    pub fn evaluate_group(&self, idx: usize, values: &[f64]) -> Result<f64, DimensionError> {
        let g = self.compiled.get(idx).ok_or(DimensionError::GroupIndex(idx))?;
        g.terms
            .iter()
            .try_fold(1.0, |acc, &(j, e)| Ok(acc * power(&self.variables[j].name, values[j], e)?))
    }

    /// All group values for a value slice aligned with [`Self::variables`].
    pub fn transform_values(&self, values: &[f64]) -> Result<Vec<f64>, DimensionError> {
        (0..self.groups.len()).map(|i| self.evaluate_group(i, values)).collect()
    }

    /// Group values (indexed like [`Self::groups`]) for a named row.
    pub fn transform_row(&self, row: &BTreeMap<String, f64>) -> Result<Vec<f64>, DimensionError> {
        self.groups
            .iter()
            .map(|g| g.evaluate(|name| row.get(name).copied()))
            .collect()
    }

    /// Recovers the value of the variable that group `idx` is solved for,
    /// given the group value and the other variables in `values`.
    pub fn solve_group(&self, idx: usize, pi: f64, target: usize, values: &[f64]) -> Result<f64, DimensionError> {
        let g = self.compiled.get(idx).ok_or(DimensionError::GroupIndex(idx))?;
        let mut rest = 1.0;
        let mut own = None;
        for &(j, e) in &g.terms {
            if j == target {
                own = Some(e);
            } else {
                rest *= power(&self.variables[j].name, values[j], e)?;
            }
        }
        let e = own.ok_or(DimensionError::Underdetermined(idx))?;
        if rest == 0.0 {
            return Err(DimensionError::DegenerateRow(self.variables[target].name.clone()));
        }
        let ratio = pi / rest;
        if e.is_one() {
            Ok(ratio)
        } else if e == -Exponent::one() {
            Ok(ratio.recip())
        } else {
            power(&self.variables[target].name, ratio, e.recip())
        }
    }

    /// Inverts output groups back to physical values. Each group is solved
    /// for its output variable; every other variable it contains must be
    /// present in `context`.
    pub fn inverse_transform_outputs(
        &self,
        pi_values: &BTreeMap<usize, f64>,
        context: &BTreeMap<String, f64>,
    ) -> Result<BTreeMap<String, f64>, DimensionError> {
        let mut out = BTreeMap::new();
        for (&idx, &pi) in pi_values {
            let group = self.groups.get(idx).ok_or(DimensionError::GroupIndex(idx))?;
            let target = self.output_variable(idx).ok_or(DimensionError::Underdetermined(idx))?;
            let mut values = vec![f64::NAN; self.variables.len()];
            for (name, _) in group.exponents() {
                let j = self.variable_index(name).expect("group refers to declared variables");
                if j == target {
                    continue;
                }
                values[j] = *context
                    .get(name)
                    .ok_or_else(|| DimensionError::MissingContext(name.clone()))?;
            }
            let v = self.solve_group(idx, pi, target, &values)?;
            out.insert(self.variables[target].name.clone(), v);
        }
        Ok(out)
    }

    /// The output variable a group is solved for: its anchor when that is an
    /// output, else the only output variable it contains.
    pub fn output_variable(&self, idx: usize) -> Option<usize> {
        let g = self.groups.get(idx)?;
        if let Some(a) = g.anchor() {
            let j = self.variable_index(a)?;
            if self.variables[j].role == Role::Output {
                return Some(j);
            }
        }
        let outs: Vec<usize> = g
            .exponents()
            .iter()
            .filter_map(|(n, _)| self.variable_index(n))
            .filter(|&j| self.variables[j].role == Role::Output)
            .collect();
        (outs.len() == 1).then(|| outs[0])
    }
}

fn compile(g: &PiGroup, vars: &[VariableDecl]) -> CompiledGroup {
    CompiledGroup {
        terms: g
            .exponents()
            .iter()
            .map(|(n, e)| {
                let j = vars
                    .iter()
                    .position(|v| &v.name == n)
                    .expect("group refers to declared variables");
                (j, *e)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimension::{kinematic_variables, DimensionVector as D};

    fn var(name: &str, d: D) -> VariableDecl {
        VariableDecl::input(name, d)
    }

    #[test]
    fn matrix_columns_match_dimensions() {
        let m = DimensionMatrix::new(vec![var("X", D::length()), var("l", D::length())]).unwrap();
        assert_eq!(m.column(0), D::new(0, 1, 0));
        assert_eq!(m.column(1), D::new(0, 1, 0));
        let m = DimensionMatrix::new(vec![var("theta", D::dimensionless())]).unwrap();
        assert!(m.column(0).is_dimensionless());
        let m = DimensionMatrix::new(vec![var("N_f", D::force())]).unwrap();
        assert_eq!(m.column(0), D::new(1, 1, -2));
    }

    #[test]
    fn matrix_rejects_duplicates_and_empty() {
        let err = DimensionMatrix::new(vec![var("X", D::length()), var("X", D::length())]).unwrap_err();
        assert_eq!(err, DimensionError::DuplicateName("X".into()));
        assert_eq!(DimensionMatrix::new(vec![]).unwrap_err(), DimensionError::Empty);
    }

    #[test]
    fn nullspace_counts() {
        let m = DimensionMatrix::new(vec![
            var("X", D::length()),
            var("v_i", D::velocity()),
            var("a", D::acceleration()),
            var("delta", D::dimensionless()),
            var("l", D::length()),
        ])
        .unwrap();
        assert_eq!(m.rank(), 2);
        let b = m.nullspace_pi_basis();
        assert_eq!(b.len(), 3);
        for g in b.groups() {
            assert!(g.dimension(m.columns()).unwrap().is_dimensionless());
        }

        let m = DimensionMatrix::new(vec![var("theta", D::dimensionless()), var("delta", D::dimensionless())]).unwrap();
        let b = m.nullspace_pi_basis();
        assert_eq!(b.len(), 2);
        assert_eq!(b.groups()[0].monomial(), "theta^1");
        assert_eq!(b.groups()[1].monomial(), "delta^1");
    }

    #[test]
    fn nullspace_empty_when_full_rank() {
        let m = DimensionMatrix::new(vec![var("l", D::length()), var("v", D::velocity())]).unwrap();
        assert!(m.nullspace_pi_basis().is_empty());
    }

    #[test]
    fn repeated_method_kinematic() {
        let m = DimensionMatrix::new(kinematic_variables()).unwrap();
        let b = m.repeated_vars_pi_basis(&["l", "v_i"]).unwrap();
        let a = b.group_by_anchor("a").unwrap();
        assert_eq!(b.groups()[a].monomial(), "a^1 l^1 v_i^-2");
        assert_eq!(b.groups()[b.group_by_anchor("X").unwrap()].monomial(), "X^1 l^-1");
        assert_eq!(b.groups()[b.group_by_anchor("theta").unwrap()].monomial(), "theta^1");
    }

    #[test]
    fn repeated_method_errors() {
        let m = DimensionMatrix::new(kinematic_variables()).unwrap();
        assert!(matches!(
            m.repeated_vars_pi_basis(&["X", "l"]),
            Err(DimensionError::DependentRepeated(_))
        ));
        assert!(matches!(
            m.repeated_vars_pi_basis(&["l"]),
            Err(DimensionError::RepeatedCount { given: 1, rank: 2 })
        ));
        assert!(matches!(
            m.repeated_vars_pi_basis(&["l", "w"]),
            Err(DimensionError::UnknownVariable(_))
        ));
    }

    #[test]
    fn transform_examples() {
        let m = DimensionMatrix::new(kinematic_variables()).unwrap();
        let b = m.repeated_vars_pi_basis(&["l", "v_i"]).unwrap();
        let row: BTreeMap<String, f64> = [
            ("a", -4.905),
            ("l", 0.475),
            ("v_i", 2.0),
            ("X", 0.0),
            ("Y", 0.1),
            ("theta", 0.3),
            ("delta", 0.2),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let pis = b.transform_row(&row).unwrap();
        let expected = -4.905 * 0.475 / (2.0 * 2.0);
        assert!((pis[b.group_by_anchor("a").unwrap()] - expected).abs() < 1e-15);
        assert_eq!(pis[b.group_by_anchor("X").unwrap()], 0.0);

        let mut degenerate = row.clone();
        degenerate.insert("v_i".into(), 0.0);
        assert_eq!(
            b.transform_row(&degenerate).unwrap_err(),
            DimensionError::DegenerateRow("v_i".into())
        );

        let mut missing = row;
        missing.remove("delta");
        assert_eq!(
            b.transform_row(&missing).unwrap_err(),
            DimensionError::MissingVariable("delta".into())
        );
    }

    #[test]
    fn inverse_examples() {
        let m = DimensionMatrix::new(kinematic_variables()).unwrap();
        let b = m.repeated_vars_pi_basis(&["l", "v_i"]).unwrap();
        let gx = b.group_by_anchor("X").unwrap();
        let gt = b.group_by_anchor("theta").unwrap();
        let ctx: BTreeMap<String, f64> = [("l".to_string(), 0.475)].into();
        let out = b.inverse_transform_outputs(&[(gx, 2.0), (gt, 0.3)].into(), &ctx).unwrap();
        assert!((out["X"] - 0.95).abs() < 1e-15);
        assert_eq!(out["theta"], 0.3);
        let err = b
            .inverse_transform_outputs(&[(gx, 2.0)].into(), &BTreeMap::new())
            .unwrap_err();
        assert_eq!(err, DimensionError::MissingContext("l".into()));
    }

    #[test]
    fn inverted_group_solves_through_reciprocal() {
        let vars = vec![VariableDecl::output("N_r", D::force()), var("N_f", D::force())];
        let m = DimensionMatrix::new(vars).unwrap();
        let b = m.repeated_vars_pi_basis(&["N_f"]).unwrap().with_inverted_group(0).unwrap();
        assert_eq!(b.groups()[0].monomial(), "N_r^-1 N_f^1");
        let ctx: BTreeMap<String, f64> = [("N_f".to_string(), 22.74)].into();
        let pi = 22.74 / 52.89;
        let out = b.inverse_transform_outputs(&[(0, pi)].into(), &ctx).unwrap();
        assert!((out["N_r"] - 52.89).abs() < 1e-12);
    }

    #[test]
    fn fractional_exponent_on_negative_base() {
        let g = PiGroup::new(vec![("q".into(), Exponent::new(1, 2))], None);
        assert_eq!(
            g.evaluate(|_| Some(-1.0)).unwrap_err(),
            DimensionError::NonRealPower("q".into())
        );
        assert!((g.evaluate(|_| Some(4.0)).unwrap() - 2.0).abs() < 1e-15);
    }
}
