//! Finite groupoids stored as dense composition tables.
//!
//! Objects and arrows are identified by dense indices. Composition is a
//! precomputed `n × n` partial table, so lookups are O(1); the groupoids used
//! here have at most a few thousand arrows. Construction only checks that
//! every index is in range. The groupoid axioms are checked by
//! [`FiniteGroupoid::validate`], which reports violations instead of failing.
//!
//! Finite groupoids are automatically proper and Hausdorff, so no topology is
//! modelled.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub type ObjectId = usize;
pub type ArrowId = usize;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupoidError {
    #[error("arrow {arrow} refers to unknown object {object}")]
    UnknownObject { arrow: ArrowId, object: ObjectId },
    #[error("table `{table}` refers to unknown arrow {arrow}")]
    UnknownArrow { table: &'static str, arrow: ArrowId },
    #[error("table `{table}` has length {got}, expected {expected}")]
    TableLength {
        table: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("composition of ({0}, {1}) is defined twice")]
    DuplicateComposition(ArrowId, ArrowId),
    #[error("groupoid has {0} arrows, more than the supported maximum")]
    TooLarge(usize),
    #[error("malformed action: {0}")]
    MalformedAction(String),
    #[error("object subset is not invariant: arrow {arrow} leaves it")]
    NotInvariant { arrow: ArrowId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arrow {
    pub src: ObjectId,
    pub tgt: ObjectId,
}

/// A small groupoid with finitely many objects and arrows.
#[derive(Clone, PartialEq)]
pub struct FiniteGroupoid {
    object_labels: Vec<String>,
    arrow_labels: Vec<String>,
    arrows: Vec<Arrow>,
    compose: Vec<u32>,
    units: Vec<ArrowId>,
    inverses: Vec<ArrowId>,
    src_fibers: Vec<Vec<ArrowId>>,
    tgt_fibers: Vec<Vec<ArrowId>>,
    orbit_of: Vec<usize>,
    orbits: Vec<Vec<ObjectId>>,
}

impl fmt::Debug for FiniteGroupoid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteGroupoid")
            .field("objects", &self.object_labels.len())
            .field("arrows", &self.arrows.len())
            .field("orbits", &self.orbits)
            .finish()
    }
}

/// One violated groupoid axiom, with the offending arrows.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    /// `src(g') = tgt(g)` but `g'g` is undefined.
    MissingComposite { left: ArrowId, right: ArrowId },
    /// `g'g` is defined although `src(g') != tgt(g)`.
    CompositeOnNonComposable { left: ArrowId, right: ArrowId },
    /// `g'g` has the wrong source or target.
    CompositeEndpoints {
        left: ArrowId,
        right: ArrowId,
        composite: ArrowId,
    },
    /// `(g''g')g != g''(g'g)`.
    Associativity {
        outer: ArrowId,
        middle: ArrowId,
        inner: ArrowId,
    },
    /// The unit of an object is not a loop at that object.
    UnitNotLoop { object: ObjectId, unit: ArrowId },
    /// Two objects share the same unit arrow.
    SharedUnit { object: ObjectId, other: ObjectId },
    /// `1_{tgt g} g != g`.
    LeftUnit { arrow: ArrowId },
    /// `g 1_{src g} != g`.
    RightUnit { arrow: ArrowId },
    /// A unit arrow is not its own inverse.
    UnitNotSelfInverse { object: ObjectId },
    /// `g⁻¹ g != 1_{src g}`.
    LeftInverse { arrow: ArrowId },
    /// `g g⁻¹ != 1_{tgt g}`.
    RightInverse { arrow: ArrowId },
}

/// Result of [`FiniteGroupoid::validate`]. Empty iff the tables form a groupoid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A pair `(g, h)` with `src g = src h`, together with the quotient `g h⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DivisiblePair {
    pub numerator: ArrowId,
    pub denominator: ArrowId,
    pub quotient: ArrowId,
}

/// Raw groupoid tables, as read from a description file or produced by a builder.
#[derive(Debug, Clone, Default)]
pub struct GroupoidTables {
    pub object_labels: Vec<String>,
    pub arrow_labels: Vec<String>,
    pub arrows: Vec<Arrow>,
    /// Triples `(g', g, g'g)`.
    pub compose: Vec<(ArrowId, ArrowId, ArrowId)>,
    pub units: Vec<ArrowId>,
    pub inverses: Vec<ArrowId>,
}

/// Dense tables are `n²` entries; beyond this the groupoid is out of scope.
pub const MAX_ARROWS: usize = 8192;

impl FiniteGroupoid {
    /// Builds a groupoid from raw tables, checking only index ranges.
    pub fn from_tables(tables: GroupoidTables) -> Result<Self, GroupoidError> {
        let GroupoidTables {
            object_labels,
            arrow_labels,
            arrows,
            compose: triples,
            units,
            inverses,
        } = tables;
        let n_obj = object_labels.len();
        let n = arrows.len();
        if n > MAX_ARROWS {
            return Err(GroupoidError::TooLarge(n));
        }
        if arrow_labels.len() != n {
            return Err(GroupoidError::TableLength {
                table: "arrow labels",
                got: arrow_labels.len(),
                expected: n,
            });
        }
        for (id, a) in arrows.iter().enumerate() {
            for object in [a.src, a.tgt] {
                if object >= n_obj {
                    return Err(GroupoidError::UnknownObject { arrow: id, object });
                }
            }
        }
        if units.len() != n_obj {
            return Err(GroupoidError::TableLength {
                table: "units",
                got: units.len(),
                expected: n_obj,
            });
        }
        if inverses.len() != n {
            return Err(GroupoidError::TableLength {
                table: "inverses",
                got: inverses.len(),
                expected: n,
            });
        }
        let check = |table, arrow: ArrowId| {
            if arrow >= n {
                Err(GroupoidError::UnknownArrow { table, arrow })
            } else {
                Ok(())
            }
        };
        for &u in &units {
            check("units", u)?;
        }
        for &i in &inverses {
            check("inverses", i)?;
        }
        let mut compose = vec![NONE; n * n];
        for &(l, r, c) in &triples {
            check("compose", l)?;
            check("compose", r)?;
            check("compose", c)?;
            let slot = &mut compose[l * n + r];
            if *slot != NONE {
                return Err(GroupoidError::DuplicateComposition(l, r));
            }
            *slot = c as u32;
        }

        let mut src_fibers = vec![Vec::new(); n_obj];
        let mut tgt_fibers = vec![Vec::new(); n_obj];
        for (id, a) in arrows.iter().enumerate() {
            src_fibers[a.src].push(id);
            tgt_fibers[a.tgt].push(id);
        }
        let (orbit_of, orbits) = connected_components(n_obj, &arrows);

        Ok(Self {
            object_labels,
            arrow_labels,
            arrows,
            compose,
            units,
            inverses,
            src_fibers,
            tgt_fibers,
            orbit_of,
            orbits,
        })
    }

    /// The raw tables back, e.g. for serialization.
    pub fn tables(&self) -> GroupoidTables {
        let n = self.arrows.len();
        let mut compose = Vec::new();
        for l in 0..n {
            for r in 0..n {
                if let Some(c) = self.raw_compose(l, r) {
                    compose.push((l, r, c));
                }
            }
        }
        GroupoidTables {
            object_labels: self.object_labels.clone(),
            arrow_labels: self.arrow_labels.clone(),
            arrows: self.arrows.clone(),
            compose,
            units: self.units.clone(),
            inverses: self.inverses.clone(),
        }
    }

    pub fn num_objects(&self) -> usize {
        self.object_labels.len()
    }

    pub fn num_arrows(&self) -> usize {
        self.arrows.len()
    }

    pub fn object_label(&self, x: ObjectId) -> &str {
        &self.object_labels[x]
    }

    pub fn arrow_label(&self, g: ArrowId) -> &str {
        &self.arrow_labels[g]
    }

    pub fn arrow(&self, g: ArrowId) -> Arrow {
        self.arrows[g]
    }

    pub fn src(&self, g: ArrowId) -> ObjectId {
        self.arrows[g].src
    }

    pub fn tgt(&self, g: ArrowId) -> ObjectId {
        self.arrows[g].tgt
    }

    pub fn unit(&self, x: ObjectId) -> ArrowId {
        self.units[x]
    }

    pub fn inverse(&self, g: ArrowId) -> ArrowId {
        self.inverses[g]
    }

    pub fn is_unit(&self, g: ArrowId) -> bool {
        self.units[self.src(g)] == g
    }

    /// Table entry for `(g', g)` regardless of composability.
    fn raw_compose(&self, left: ArrowId, right: ArrowId) -> Option<ArrowId> {
        let c = self.compose[left * self.arrows.len() + right];
        (c != NONE).then_some(c as ArrowId)
    }

    /// `g'g`, defined iff `src g' = tgt g`.
    pub fn compose(&self, left: ArrowId, right: ArrowId) -> Option<ArrowId> {
        if self.src(left) != self.tgt(right) {
            return None;
        }
        self.raw_compose(left, right)
    }

    /// Composition on a pair known to be composable in a valid groupoid.
    ///
    /// Panics if the composite is missing.
    pub fn mul(&self, left: ArrowId, right: ArrowId) -> ArrowId {
        self.compose(left, right).unwrap_or_else(|| {
            panic!("arrows {left} and {right} are not composable")
        })
    }

    /// Arrows with source `x`, in ascending id order.
    pub fn source_fiber(&self, x: ObjectId) -> &[ArrowId] {
        &self.src_fibers[x]
    }

    /// Arrows with target `x`, in ascending id order.
    pub fn target_fiber(&self, x: ObjectId) -> &[ArrowId] {
        &self.tgt_fibers[x]
    }

    /// All composable pairs `(g', g)` with `src g' = tgt g`.
    pub fn composable_pairs(&self) -> impl Iterator<Item = (ArrowId, ArrowId)> + '_ {
        (0..self.num_arrows()).flat_map(move |g| {
            self.source_fiber(self.tgt(g))
                .iter()
                .map(move |&left| (left, g))
        })
    }

    /// Every pair `(g, h)` with `src g = src h`, with the quotient `g h⁻¹`.
    pub fn divisible_pairs(&self) -> Vec<DivisiblePair> {
        let mut out = Vec::new();
        for fiber in &self.src_fibers {
            for &g in fiber {
                for &h in fiber {
                    out.push(DivisiblePair {
                        numerator: g,
                        denominator: h,
                        quotient: self.mul(g, self.inverse(h)),
                    });
                }
            }
        }
        out
    }

    /// Orbit partition of the objects; blocks sorted by their smallest object.
    pub fn orbits(&self) -> &[Vec<ObjectId>] {
        &self.orbits
    }

    /// Index into [`orbits`](Self::orbits) of the orbit through `x`.
    pub fn orbit_of(&self, x: ObjectId) -> usize {
        self.orbit_of[x]
    }

    /// Checks every groupoid axiom by exhaustive enumeration.
    pub fn validate(&self) -> ValidationReport {
        let n = self.num_arrows();
        let mut violations = BTreeSet::new();

        for l in 0..n {
            for r in 0..n {
                let composable = self.src(l) == self.tgt(r);
                match (composable, self.raw_compose(l, r)) {
                    (true, None) => {
                        violations.insert(Violation::MissingComposite { left: l, right: r });
                    }
                    (false, Some(_)) => {
                        violations.insert(Violation::CompositeOnNonComposable {
                            left: l,
                            right: r,
                        });
                    }
                    (true, Some(c)) => {
                        if self.src(c) != self.src(r) || self.tgt(c) != self.tgt(l) {
                            violations.insert(Violation::CompositeEndpoints {
                                left: l,
                                right: r,
                                composite: c,
                            });
                        }
                    }
                    (false, None) => {}
                }
            }
        }

        for (h, g) in self.composable_pairs() {
            let Some(hg) = self.compose(h, g) else { continue };
            for &k in self.source_fiber(self.tgt(h)) {
                let lhs = self.compose(k, h).and_then(|kh| self.compose(kh, g));
                let rhs = self.compose(k, hg);
                if lhs.is_none() || lhs != rhs {
                    violations.insert(Violation::Associativity {
                        outer: k,
                        middle: h,
                        inner: g,
                    });
                }
            }
        }

        let mut seen = vec![None; n];
        for (x, &u) in self.units.iter().enumerate() {
            if self.src(u) != x || self.tgt(u) != x {
                violations.insert(Violation::UnitNotLoop { object: x, unit: u });
            }
            if let Some(other) = seen[u] {
                violations.insert(Violation::SharedUnit { object: x, other });
            }
            seen[u] = Some(x);
            if self.inverses[u] != u {
                violations.insert(Violation::UnitNotSelfInverse { object: x });
            }
        }

        for g in 0..n {
            let a = self.arrows[g];
            if self.compose(self.units[a.tgt], g) != Some(g) {
                violations.insert(Violation::LeftUnit { arrow: g });
            }
            if self.compose(g, self.units[a.src]) != Some(g) {
                violations.insert(Violation::RightUnit { arrow: g });
            }
            let inv = self.inverses[g];
            if self.compose(inv, g) != Some(self.units[a.src]) {
                violations.insert(Violation::LeftInverse { arrow: g });
            }
            if self.compose(g, inv) != Some(self.units[a.tgt]) {
                violations.insert(Violation::RightInverse { arrow: g });
            }
        }

        ValidationReport {
            violations: violations.into_iter().collect(),
        }
    }

    /// Restriction `Γ|_S` to an invariant set of objects.
    ///
    /// Returns the restricted groupoid and, for each of its arrows, the id of
    /// the corresponding arrow of `self`. Objects and arrows keep their
    /// relative order.
    pub fn restrict(&self, objects: &[ObjectId]) -> Result<Restriction, GroupoidError> {
        let mut keep = vec![false; self.num_objects()];
        for &x in objects {
            keep[x] = true;
        }
        for (g, a) in self.arrows.iter().enumerate() {
            if keep[a.src] != keep[a.tgt] {
                return Err(GroupoidError::NotInvariant { arrow: g });
            }
        }
        let object_map: Vec<ObjectId> = (0..self.num_objects()).filter(|&x| keep[x]).collect();
        let mut new_object = vec![usize::MAX; self.num_objects()];
        for (new, &old) in object_map.iter().enumerate() {
            new_object[old] = new;
        }
        let arrow_map: Vec<ArrowId> = (0..self.num_arrows())
            .filter(|&g| keep[self.src(g)])
            .collect();
        let mut new_arrow = vec![usize::MAX; self.num_arrows()];
        for (new, &old) in arrow_map.iter().enumerate() {
            new_arrow[old] = new;
        }

        let mut compose = Vec::new();
        for &l in &arrow_map {
            for &r in &arrow_map {
                if let Some(c) = self.raw_compose(l, r) {
                    compose.push((new_arrow[l], new_arrow[r], new_arrow[c]));
                }
            }
        }
        let tables = GroupoidTables {
            object_labels: object_map
                .iter()
                .map(|&x| self.object_labels[x].clone())
                .collect(),
            arrow_labels: arrow_map
                .iter()
                .map(|&g| self.arrow_labels[g].clone())
                .collect(),
            arrows: arrow_map
                .iter()
                .map(|&g| Arrow {
                    src: new_object[self.src(g)],
                    tgt: new_object[self.tgt(g)],
                })
                .collect(),
            compose,
            units: object_map.iter().map(|&x| new_arrow[self.units[x]]).collect(),
            inverses: arrow_map
                .iter()
                .map(|&g| new_arrow[self.inverses[g]])
                .collect(),
        };
        Ok(Restriction {
            groupoid: FiniteGroupoid::from_tables(tables)?,
            object_map,
            arrow_map,
        })
    }
}

/// A restricted groupoid together with the inclusion maps into the ambient one.
#[derive(Debug, Clone)]
pub struct Restriction {
    pub groupoid: FiniteGroupoid,
    pub object_map: Vec<ObjectId>,
    pub arrow_map: Vec<ArrowId>,
}

fn connected_components(n_obj: usize, arrows: &[Arrow]) -> (Vec<usize>, Vec<Vec<ObjectId>>) {
    let mut parent: Vec<usize> = (0..n_obj).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for a in arrows {
        let (ra, rb) = (find(&mut parent, a.src), find(&mut parent, a.tgt));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut orbit_of = vec![usize::MAX; n_obj];
    let mut orbits: Vec<Vec<ObjectId>> = Vec::new();
    let mut root_index = vec![usize::MAX; n_obj];
    for x in 0..n_obj {
        let r = find(&mut parent, x);
        if root_index[r] == usize::MAX {
            root_index[r] = orbits.len();
            orbits.push(Vec::new());
        }
        orbit_of[x] = root_index[r];
        orbits[root_index[r]].push(x);
    }
    (orbit_of, orbits)
}

/// A left action of a one-object groupoid (a group) on a finite set.
#[derive(Debug, Clone)]
pub struct FiniteGroupAction {
    pub group: FiniteGroupoid,
    pub point_labels: Vec<String>,
    /// `act[g][u]` is the image of point `u` under group element `g`.
    pub act: Vec<Vec<usize>>,
}

impl FiniteGroupAction {
    pub fn new(
        group: FiniteGroupoid,
        point_labels: Vec<String>,
        act: Vec<Vec<usize>>,
    ) -> Result<Self, GroupoidError> {
        let malformed = |msg: String| Err(GroupoidError::MalformedAction(msg));
        if group.num_objects() != 1 {
            return malformed(format!("group has {} objects", group.num_objects()));
        }
        if !group.validate().is_valid() {
            return malformed("group tables violate the groupoid axioms".into());
        }
        let n_points = point_labels.len();
        if act.len() != group.num_arrows() {
            return malformed(format!(
                "action table has {} rows for {} group elements",
                act.len(),
                group.num_arrows()
            ));
        }
        for (g, row) in act.iter().enumerate() {
            if row.len() != n_points || row.iter().any(|&u| u >= n_points) {
                return malformed(format!("row {g} of the action table is malformed"));
            }
        }
        let e = group.unit(0);
        for u in 0..n_points {
            if act[e][u] != u {
                return malformed(format!("identity moves point {u}"));
            }
        }
        for (h, g) in group.composable_pairs() {
            let hg = group.mul(h, g);
            for u in 0..n_points {
                if act[hg][u] != act[h][act[g][u]] {
                    return malformed(format!("act({hg}, {u}) != act({h}, act({g}, {u}))"));
                }
            }
        }
        Ok(Self {
            group,
            point_labels,
            act,
        })
    }

    pub fn num_points(&self) -> usize {
        self.point_labels.len()
    }

    /// Arrow id of `(g, u)` in [`action_groupoid`].
    pub fn arrow_id(&self, g: ArrowId, u: usize) -> ArrowId {
        g * self.num_points() + u
    }
}

/// The action groupoid `G ⋉ U`: arrows `(g, u)` from `u` to `g·u`.
///
/// Arrow `(g, u)` has id `g · |U| + u`.
pub fn action_groupoid(action: &FiniteGroupAction) -> FiniteGroupoid {
    let group = &action.group;
    let np = action.num_points();
    let id = |g: ArrowId, u: usize| g * np + u;
    let mut arrows = Vec::new();
    let mut labels = Vec::new();
    let mut inverses = Vec::new();
    for g in 0..group.num_arrows() {
        for u in 0..np {
            arrows.push(Arrow {
                src: u,
                tgt: action.act[g][u],
            });
            labels.push(format!(
                "({},{})",
                group.arrow_label(g),
                action.point_labels[u]
            ));
            inverses.push(id(group.inverse(g), action.act[g][u]));
        }
    }
    let mut compose = Vec::new();
    for (h, g) in group.composable_pairs() {
        let hg = group.mul(h, g);
        for u in 0..np {
            compose.push((id(h, action.act[g][u]), id(g, u), id(hg, u)));
        }
    }
    let e = group.unit(0);
    let tables = GroupoidTables {
        object_labels: action.point_labels.clone(),
        arrow_labels: labels,
        arrows,
        compose,
        units: (0..np).map(|u| id(e, u)).collect(),
        inverses,
    };
    FiniteGroupoid::from_tables(tables).expect("action groupoid tables are in range")
}

/// The groupoid with one object and one arrow.
pub fn trivial_groupoid() -> FiniteGroupoid {
    group_from_table(&[vec![0]], vec!["e".into()]).expect("trivial group")
}

/// The pair groupoid on `n` objects: one arrow `(y, x)` from `x` to `y` for every pair.
///
/// Arrow `(y, x)` has id `y · n + x`.
pub fn pair_groupoid(n: usize) -> FiniteGroupoid {
    let id = |y: usize, x: usize| y * n + x;
    let mut arrows = Vec::new();
    let mut labels = Vec::new();
    let mut inverses = Vec::new();
    for y in 0..n {
        for x in 0..n {
            arrows.push(Arrow { src: x, tgt: y });
            labels.push(format!("({y},{x})"));
            inverses.push(id(x, y));
        }
    }
    let mut compose = Vec::new();
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                compose.push((id(z, y), id(y, x), id(z, x)));
            }
        }
    }
    let tables = GroupoidTables {
        object_labels: (0..n).map(|x| x.to_string()).collect(),
        arrow_labels: labels,
        arrows,
        compose,
        units: (0..n).map(|x| id(x, x)).collect(),
        inverses,
    };
    FiniteGroupoid::from_tables(tables).expect("pair groupoid tables are in range")
}

/// A one-object groupoid from a group multiplication table `mul[a][b] = ab`.
///
/// The identity and inverses are located in the table.
pub fn group_from_table(
    mul: &[Vec<usize>],
    labels: Vec<String>,
) -> Result<FiniteGroupoid, GroupoidError> {
    let n = mul.len();
    let malformed = |msg: &str| GroupoidError::MalformedAction(msg.to_string());
    if labels.len() != n || mul.iter().any(|row| row.len() != n || row.iter().any(|&c| c >= n)) {
        return Err(malformed("multiplication table is not square"));
    }
    let e = (0..n)
        .find(|&e| (0..n).all(|a| mul[e][a] == a && mul[a][e] == a))
        .ok_or_else(|| malformed("no identity element"))?;
    let inverses = (0..n)
        .map(|a| {
            (0..n)
                .find(|&b| mul[a][b] == e && mul[b][a] == e)
                .ok_or_else(|| malformed("element without inverse"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut compose = Vec::new();
    for (a, row) in mul.iter().enumerate() {
        for (b, &ab) in row.iter().enumerate() {
            compose.push((a, b, ab));
        }
    }
    FiniteGroupoid::from_tables(GroupoidTables {
        object_labels: vec!["*".into()],
        arrow_labels: labels,
        arrows: vec![Arrow { src: 0, tgt: 0 }; n],
        compose,
        units: vec![e],
        inverses,
    })
}

/// The cyclic group `ℤ/n` as a one-object groupoid; element `j` has id `j`.
pub fn cyclic_group(n: usize) -> FiniteGroupoid {
    let mul: Vec<Vec<usize>> = (0..n)
        .map(|a| (0..n).map(|b| (a + b) % n).collect())
        .collect();
    group_from_table(&mul, (0..n).map(|j| j.to_string()).collect()).expect("cyclic group")
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// The symmetric group `S_n`; element ids follow [`permutations`].
///
/// The product `σ τ` is the composite `u ↦ σ(τ(u))`.
pub fn symmetric_group(n: usize) -> FiniteGroupoid {
    let perms = permutations(n);
    let index = |p: &[usize]| perms.iter().position(|q| q == p).expect("permutation");
    let mul: Vec<Vec<usize>> = perms
        .iter()
        .map(|s| {
            perms
                .iter()
                .map(|t| index(&t.iter().map(|&u| s[u]).collect::<Vec<_>>()))
                .collect()
        })
        .collect();
    let labels = perms
        .iter()
        .map(|p| p.iter().map(|v| v.to_string()).collect::<String>())
        .collect();
    group_from_table(&mul, labels).expect("symmetric group")
}

/// `S_n` acting on `{0, …, n-1}` by permutation.
pub fn symmetric_action(n: usize) -> FiniteGroupAction {
    let group = symmetric_group(n);
    let act = permutations(n);
    FiniteGroupAction::new(group, (0..n).map(|u| u.to_string()).collect(), act)
        .expect("permutation action")
}

/// `ℤ/n` acting on `ℤ/m` by `(j, a) ↦ a + k·j mod m`.
///
/// Requires `m | k·n` so that the action is well defined.
pub fn twisted_cyclic_action(n: usize, m: usize, k: usize) -> Result<FiniteGroupAction, GroupoidError> {
    let act: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..m).map(|a| (a + k * j) % m).collect())
        .collect();
    FiniteGroupAction::new(cyclic_group(n), (0..m).map(|a| a.to_string()).collect(), act)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2_on(points: usize, act: Vec<Vec<usize>>) -> FiniteGroupAction {
        FiniteGroupAction::new(
            cyclic_group(2),
            (0..points).map(|u| u.to_string()).collect(),
            act,
        )
        .unwrap()
    }

    /// ℤ/2 swapping 0 and 1, fixing 2 when present.
    fn z2_swap(points: usize) -> FiniteGroupAction {
        let mut swap: Vec<usize> = (0..points).collect();
        swap.swap(0, 1);
        z2_on(points, vec![(0..points).collect(), swap])
    }

    #[test]
    fn trivial_groupoid_is_valid() {
        let g = trivial_groupoid();
        assert_eq!(g.num_arrows(), 1);
        assert!(g.validate().is_valid());
    }

    #[test]
    fn pair_groupoid_is_valid() {
        let g = pair_groupoid(2);
        assert_eq!(g.num_arrows(), 4);
        assert!(g.validate().is_valid());
    }

    #[test]
    fn corrupted_inverse_reports_exactly_that_arrow() {
        let g = pair_groupoid(2);
        let mut tables = g.tables();
        // arrow 2 is (1,0): 0 → 1; map its inverse to itself
        tables.inverses[2] = 2;
        let bad = FiniteGroupoid::from_tables(tables).unwrap();
        assert_eq!(
            bad.validate().violations,
            vec![
                Violation::LeftInverse { arrow: 2 },
                Violation::RightInverse { arrow: 2 }
            ]
        );
    }

    #[test]
    fn corrupted_composition_is_reported() {
        let g = pair_groupoid(2);
        let mut tables = g.tables();
        let pos = tables
            .compose
            .iter()
            .position(|&(l, r, _)| (l, r) == (2, 1))
            .unwrap();
        tables.compose.remove(pos);
        let bad = FiniteGroupoid::from_tables(tables).unwrap();
        let report = bad.validate();
        assert!(report
            .violations
            .contains(&Violation::MissingComposite { left: 2, right: 1 }));
    }

    #[test]
    fn out_of_range_tables_are_rejected() {
        let mut tables = pair_groupoid(2).tables();
        tables.inverses[0] = 9;
        assert!(matches!(
            FiniteGroupoid::from_tables(tables),
            Err(GroupoidError::UnknownArrow { .. })
        ));
    }

    #[test]
    fn action_groupoid_of_swap() {
        let g = action_groupoid(&z2_swap(2));
        assert_eq!(g.num_arrows(), 4);
        assert!(g.validate().is_valid());
        assert_eq!(g.orbits(), &[vec![0, 1]]);
        for x in 0..2 {
            assert_eq!(g.target_fiber(x).len(), 2);
        }
    }

    #[test]
    fn trivial_group_action_has_only_units() {
        let trivial = group_from_table(&[vec![0]], vec!["e".into()]).unwrap();
        let action = FiniteGroupAction::new(
            trivial,
            vec!["1".into(), "2".into(), "3".into()],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let g = action_groupoid(&action);
        assert_eq!(g.num_arrows(), 3);
        assert!((0..3).all(|a| g.is_unit(a)));
        assert_eq!(g.orbits(), &[vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn trivial_action_gives_group_bundle() {
        let g = action_groupoid(&z2_on(1, vec![vec![0], vec![0]]));
        assert_eq!(g.num_objects(), 1);
        assert_eq!(g.num_arrows(), 2);
        assert!(g.validate().is_valid());
    }

    #[test]
    fn malformed_actions_are_rejected() {
        let group = cyclic_group(2);
        let labels = vec!["a".to_string(), "b".to_string()];
        // identity moves a point
        let err = FiniteGroupAction::new(group.clone(), labels.clone(), vec![vec![1, 0], vec![1, 0]]);
        assert!(matches!(err, Err(GroupoidError::MalformedAction(_))));
        // not a homomorphism: g·g should be e but maps 0 ↦ 1 twice as a constant map
        let err = FiniteGroupAction::new(group, labels, vec![vec![0, 1], vec![1, 1]]);
        assert!(matches!(err, Err(GroupoidError::MalformedAction(_))));
    }

    #[test]
    fn divisible_pair_counts() {
        let t = trivial_groupoid();
        let pairs = t.divisible_pairs();
        assert_eq!(
            pairs,
            vec![DivisiblePair {
                numerator: 0,
                denominator: 0,
                quotient: 0
            }]
        );
        assert_eq!(pair_groupoid(2).divisible_pairs().len(), 8);
        assert_eq!(action_groupoid(&z2_swap(2)).divisible_pairs().len(), 8);
    }

    #[test]
    fn divisible_pair_quotients() {
        let g = action_groupoid(&symmetric_action(3));
        for p in g.divisible_pairs() {
            let q = p.quotient;
            assert_eq!(g.src(q), g.tgt(p.denominator));
            assert_eq!(g.tgt(q), g.tgt(p.numerator));
            assert_eq!(g.mul(q, p.denominator), p.numerator);
        }
    }

    #[test]
    fn orbits_of_swap_with_fixed_point() {
        let g = action_groupoid(&z2_swap(3));
        assert_eq!(g.orbits(), &[vec![0, 1], vec![2]]);
        assert_eq!(g.orbit_of(2), 1);
    }

    #[test]
    fn restriction_to_invariant_subsets() {
        let g = action_groupoid(&z2_swap(3));
        let r = g.restrict(&[2]).unwrap();
        assert_eq!(r.groupoid.num_arrows(), 2);
        assert!(r.groupoid.validate().is_valid());
        assert_eq!(r.object_map, vec![2]);
        let r = g.restrict(&[0, 1]).unwrap();
        assert_eq!(r.groupoid.num_arrows(), 4);
        assert!(r.groupoid.validate().is_valid());
        assert!(matches!(
            g.restrict(&[0]),
            Err(GroupoidError::NotInvariant { .. })
        ));
    }

    #[test]
    fn symmetric_group_sizes() {
        let s3 = symmetric_group(3);
        assert_eq!(s3.num_arrows(), 6);
        assert!(s3.validate().is_valid());
        let g = action_groupoid(&symmetric_action(3));
        assert_eq!(g.num_arrows(), 18);
        assert!(g.validate().is_valid());
        assert_eq!(g.orbits().len(), 1);
    }

    #[test]
    fn twisted_cyclic_action_orbits() {
        // k = 2 on ℤ/8 splits the points into even and odd residues
        let g = action_groupoid(&twisted_cyclic_action(8, 8, 2).unwrap());
        assert!(g.validate().is_valid());
        assert_eq!(g.orbits().len(), 2);
    }
}
