//! Bounded convex bodies: a box intersected with halfspaces, optionally grown
//! by a Euclidean ball of radius `expansion`.

use super::lp::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use super::{dot, norm};
use crate::error::{check_dim, check_finite, Error, Result};

const MEMBERSHIP_TOL: f64 = 1e-9;
const NORMAL_TOL: f64 = 1e-12;

/// `⟨normal, v⟩ ≤ offset` with a unit-norm normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    /// Builds a halfspace, rescaling the normal to unit length.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        check_finite("halfspace normal", &normal)?;
        if !offset.is_finite() {
            return Err(Error::Input("halfspace offset is not finite".into()));
        }
        let n = norm(&normal);
        if n <= NORMAL_TOL {
            return Err(Error::Input("halfspace normal is zero".into()));
        }
        Ok(Self {
            normal: normal.iter().map(|a| a / n).collect(),
            offset: offset / n,
        })
    }

    /// Positive when `point` lies outside.
    pub fn violation(&self, point: &[f64]) -> f64 {
        dot(&self.normal, point) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    lower: Vec<f64>,
    upper: Vec<f64>,
    halfspaces: Vec<Halfspace>,
    /// Nonzero coordinates of each halfspace normal.
    supports: Vec<Vec<usize>>,
    expansion: f64,
}

impl ConvexBody {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim("box upper bounds", lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::Input("body dimension must be positive".into()));
        }
        check_finite("box bounds", &lower)?;
        check_finite("box bounds", &upper)?;
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::Input("box is empty".into()));
        }
        Ok(Self {
            lower,
            upper,
            halfspaces: Vec::new(),
            supports: Vec::new(),
            expansion: 0.0,
        })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn with_expansion(mut self, z: f64) -> Result<Self> {
        self.set_expansion(z)?;
        Ok(self)
    }

    pub fn set_expansion(&mut self, z: f64) -> Result<()> {
        if !(z >= 0.0 && z.is_finite()) {
            return Err(Error::Input(format!("expansion must be nonnegative, got {z}")));
        }
        self.expansion = z;
        Ok(())
    }

    pub fn add_halfspace(&mut self, normal: Vec<f64>, offset: f64) -> Result<()> {
        check_dim("halfspace normal", self.dim(), normal.len())?;
        self.push(Halfspace::new(normal, offset)?)
    }

    pub fn push(&mut self, h: Halfspace) -> Result<()> {
        check_dim("halfspace normal", self.dim(), h.normal.len())?;
        self.supports
            .push((0..h.normal.len()).filter(|&j| h.normal[j] != 0.0).collect());
        self.halfspaces.push(h);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    /// Nonzero coordinates of each halfspace normal, parallel to
    /// [`halfspaces`](Self::halfspaces).
    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn expansion(&self) -> f64 {
        self.expansion
    }

    /// The same polytope without the ball expansion.
    pub fn polytope(&self) -> ConvexBody {
        ConvexBody {
            expansion: 0.0,
            ..self.clone()
        }
    }

    /// Largest violation of the polytope constraints (box and halfspaces).
    pub fn max_violation(&self, point: &[f64]) -> f64 {
        let boxed = self
            .lower
            .iter()
            .zip(&self.upper)
            .zip(point)
            .map(|((l, u), x)| (l - x).max(x - u))
            .fold(f64::NEG_INFINITY, f64::max);
        self.halfspaces
            .iter()
            .map(|h| h.violation(point))
            .fold(boxed, f64::max)
    }

    /// Membership in the polytope grown by the expansion radius.
    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        check_dim("point", self.dim(), point.len())?;
        check_finite("point", point)?;
        let violation = self.max_violation(point);
        if violation <= MEMBERSHIP_TOL {
            return Ok(true);
        }
        let z = self.expansion;
        if z == 0.0 || violation > z + MEMBERSHIP_TOL {
            return Ok(false);
        }
        let box_dist = self
            .lower
            .iter()
            .zip(&self.upper)
            .zip(point)
            .map(|((l, u), x)| {
                let d = (l - x).max(x - u).max(0.0);
                d * d
            })
            .sum::<f64>()
            .sqrt();
        if box_dist > z + MEMBERSHIP_TOL {
            return Ok(false);
        }
        Ok(self.distance_within(point, z + MEMBERSHIP_TOL))
    }

    /// Euclidean distance from `point` to the polytope (Dykstra's alternating
    /// projections onto the box and each halfspace).
    pub fn distance_to_polytope(&self, point: &[f64]) -> Result<f64> {
        check_dim("point", self.dim(), point.len())?;
        if self.max_violation(point) <= 0.0 {
            return Ok(0.0);
        }
        let projection = self.dykstra(point, None);
        Ok(distance(point, &projection))
    }

    fn distance_within(&self, point: &[f64], radius: f64) -> bool {
        let projection = self.dykstra(point, Some(radius));
        distance(point, &projection) <= radius
    }

    /// Runs Dykstra's algorithm. With `accept`, stops early as soon as an
    /// iterate is feasible and within that radius of `point`.
    fn dykstra(&self, point: &[f64], accept: Option<f64>) -> Vec<f64> {
        let n = self.dim();
        let sets = self.halfspaces.len() + 1;
        let mut x = point.to_vec();
        let mut incs = vec![vec![0.0; n]; sets];
        let mut y = vec![0.0; n];
        for _ in 0..200_000 {
            let mut change = 0.0f64;
            // Box.
            for j in 0..n {
                y[j] = x[j] + incs[0][j];
            }
            for j in 0..n {
                let p = y[j].clamp(self.lower[j], self.upper[j]);
                incs[0][j] = y[j] - p;
                change = change.max((p - x[j]).abs());
                x[j] = p;
            }
            for (s, h) in self.halfspaces.iter().enumerate() {
                let inc = &mut incs[s + 1];
                for j in 0..n {
                    y[j] = x[j] + inc[j];
                }
                let v = dot(&h.normal, &y) - h.offset;
                let t = v.max(0.0);
                for j in 0..n {
                    let p = y[j] - t * h.normal[j];
                    inc[j] = y[j] - p;
                    change = change.max((p - x[j]).abs());
                    x[j] = p;
                }
            }
            if let Some(radius) = accept {
                if self.max_violation(&x) <= 1e-13 && distance(point, &x) <= radius {
                    return x;
                }
            }
            if change < 1e-14 {
                break;
            }
        }
        x
    }

    /// Support value `max ⟨direction, v⟩` over the body (the expansion adds
    /// `z·‖direction‖`).
    pub fn support(&self, direction: &[f64]) -> Result<f64> {
        let (value, _) = self.support_point(direction)?;
        Ok(value + self.expansion * norm(direction))
    }

    /// `max - min` of `⟨direction, v⟩` over the body.
    pub fn width(&self, direction: &[f64]) -> Result<f64> {
        let neg: Vec<f64> = direction.iter().map(|a| -a).collect();
        let hi = self.support(direction)?;
        let lo = -self.support(&neg)?;
        Ok((hi - lo).max(0.0))
    }

    /// Maximizer of `⟨direction, v⟩` over the polytope (no expansion).
    ///
    /// The LP is solved only on the coordinates coupled to the direction's
    /// support through shared halfspaces; the remaining coordinates are
    /// returned at the box center.
    pub fn support_point(&self, direction: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim("direction", self.dim(), direction.len())?;
        check_finite("direction", direction)?;
        let n = self.dim();
        let mut point: Vec<f64> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect();
        let seeds: Vec<usize> = (0..n).filter(|&j| direction[j] != 0.0).collect();
        if seeds.is_empty() {
            return Ok((0.0, point));
        }
        let mut value = 0.0;
        let n_comp = self.components_of(&seeds);
        let mut owner = vec![usize::MAX; n];
        for (c, comp) in n_comp.iter().enumerate() {
            for &j in comp {
                owner[j] = c;
            }
        }
        for (c, comp) in n_comp.iter().enumerate() {
            let rows: Vec<&Halfspace> = self
                .halfspaces
                .iter()
                .zip(&self.supports)
                .filter(|(_, s)| s.first().is_some_and(|&j| owner[j] == c))
                .map(|(h, _)| h)
                .collect();
            if rows.is_empty() {
                for &j in comp {
                    let c = direction[j];
                    let x = if c >= 0.0 { self.upper[j] } else { self.lower[j] };
                    point[j] = x;
                    value += c * x;
                }
                continue;
            }
            let mut lp = LinearProgram::new(comp.iter().map(|&j| direction[j]).collect())
                .with_bounds(comp.iter().map(|&j| (self.lower[j], self.upper[j])).collect());
            for h in rows {
                lp.constrain(
                    comp.iter().map(|&j| h.normal[j]).collect(),
                    Relation::Le,
                    h.offset,
                );
            }
            match solve_lp(&lp, Sense::Maximize)? {
                LpStatus::Optimal { value: v, point: p } => {
                    value += v;
                    for (k, &j) in comp.iter().enumerate() {
                        point[j] = p[k];
                    }
                }
                LpStatus::Infeasible => return Err(Error::EmptyBody),
                LpStatus::Unbounded => {
                    return Err(Error::SolverFailure("support LP over a box is unbounded".into()))
                }
            }
        }
        Ok((value, point))
    }

    /// Groups the coordinates reachable from `seeds` through shared halfspaces
    /// into connected components (each sorted ascending).
    pub fn components_of(&self, seeds: &[usize]) -> Vec<Vec<usize>> {
        let n = self.dim();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        for support in &self.supports {
            if let Some((&f, rest)) = support.split_first() {
                for &j in rest {
                    let (ra, rb) = (find(&mut parent, f), find(&mut parent, j));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        let mut roots: Vec<usize> = seeds.iter().map(|&s| find(&mut parent, s)).collect();
        roots.sort_unstable();
        roots.dedup();
        let mut comps = vec![Vec::new(); roots.len()];
        for j in 0..n {
            let r = find(&mut parent, j);
            if let Ok(pos) = roots.binary_search(&r) {
                comps[pos].push(j);
            }
        }
        comps
    }

    /// The sub-body on `coords`, keeping the halfspaces supported there.
    ///
    /// When `coords` is a union of components this is an exact factor of the
    /// body: the body is the product of the factor and its complement.
    pub fn restrict(&self, coords: &[usize]) -> Result<ConvexBody> {
        let mut inside = vec![false; self.dim()];
        for &j in coords {
            inside[j] = true;
        }
        let mut sub = ConvexBody::new(
            coords.iter().map(|&j| self.lower[j]).collect(),
            coords.iter().map(|&j| self.upper[j]).collect(),
        )?;
        sub.expansion = self.expansion;
        for (h, support) in self.halfspaces.iter().zip(&self.supports) {
            if !support.iter().any(|&j| inside[j]) {
                continue;
            }
            if support.iter().any(|&j| !inside[j]) {
                return Err(Error::Input("restriction splits a halfspace".into()));
            }
            sub.push(Halfspace {
                normal: coords.iter().map(|&j| h.normal[j]).collect(),
                offset: h.offset,
            })?;
        }
        Ok(sub)
    }

    /// Center and radius of the largest Euclidean ball inside the polytope.
    pub fn chebyshev_center(&self) -> Result<(Vec<f64>, f64)> {
        let n = self.dim();
        let mut objective = vec![0.0; n + 1];
        objective[n] = 1.0;
        let mut bounds: Vec<(f64, f64)> =
            self.lower.iter().zip(&self.upper).map(|(&l, &u)| (l, u)).collect();
        bounds.push((0.0, f64::INFINITY));
        let mut lp = LinearProgram::new(objective).with_bounds(bounds);
        for h in &self.halfspaces {
            let mut row = h.normal.clone();
            row.push(1.0);
            lp.constrain(row, Relation::Le, h.offset);
        }
        for j in 0..n {
            let mut row = vec![0.0; n + 1];
            row[j] = 1.0;
            row[n] = 1.0;
            lp.constrain(row.clone(), Relation::Le, self.upper[j]);
            row[j] = -1.0;
            lp.constrain(row, Relation::Le, -self.lower[j]);
        }
        match solve_lp(&lp, Sense::Maximize)? {
            LpStatus::Optimal { mut point, .. } => {
                let r = point.pop().unwrap_or(0.0).max(0.0);
                if self.max_violation(&point) > MEMBERSHIP_TOL {
                    return Err(Error::EmptyBody);
                }
                Ok((point, r))
            }
            LpStatus::Infeasible => Err(Error::EmptyBody),
            LpStatus::Unbounded => Err(Error::SolverFailure("Chebyshev LP unbounded".into())),
        }
    }

    /// Smallest axis-aligned box containing the body (including expansion).
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            hi.push(self.support(&e)?);
            e[j] = -1.0;
            lo.push(-self.support(&e)?);
            e[j] = 0.0;
        }
        Ok((lo, hi))
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
