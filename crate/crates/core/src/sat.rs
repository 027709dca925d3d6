//! A small CDCL solver: two watched literals, first-UIP learning and
//! activity-ordered decisions. Sized for the grounded monadic problems the
//! oracle produces, not for industrial instances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct Lit(u32);

impl Lit {
    pub fn new(var: u32, positive: bool) -> Lit {
        Lit(var * 2 + u32::from(!positive))
    }

    pub fn var(self) -> u32 {
        self.0 >> 1
    }

    pub fn positive(self) -> bool {
        self.0 & 1 == 0
    }

    fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(PartialEq)]
struct HeapEntry(f64, u32);

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Default)]
pub(crate) struct Solver {
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    values: Vec<Option<bool>>,
    levels: Vec<usize>,
    reasons: Vec<Option<usize>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    heap: BinaryHeap<HeapEntry>,
    units: Vec<Lit>,
    inconsistent: bool,
}

impl Solver {
    pub fn new() -> Self {
        Solver {
            var_inc: 1.0,
            ..Default::default()
        }
    }

    pub fn new_var(&mut self) -> u32 {
        let v = self.values.len() as u32;
        self.values.push(None);
        self.levels.push(0);
        self.reasons.push(None);
        self.activity.push(0.0);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        v
    }

    pub fn add_clause(&mut self, lits: &[Lit]) {
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_by_key(|l| l.0);
        c.dedup();
        if c.windows(2).any(|w| w[0] == !w[1]) {
            return;
        }
        match c.len() {
            0 => self.inconsistent = true,
            1 => self.units.push(c[0]),
            _ => {
                let idx = self.clauses.len();
                self.watches[(!c[0]).index()].push(idx);
                self.watches[(!c[1]).index()].push(idx);
                self.clauses.push(c);
            }
        }
    }

    fn value(&self, l: Lit) -> Option<bool> {
        self.values[l.var() as usize].map(|b| b == l.positive())
    }

    fn level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, l: Lit, reason: Option<usize>) -> bool {
        match self.value(l) {
            Some(v) => v,
            None => {
                let v = l.var() as usize;
                self.values[v] = Some(l.positive());
                self.levels[v] = self.level();
                self.reasons[v] = reason;
                self.trail.push(l);
                true
            }
        }
    }

    /// Returns the index of a conflicting clause, if any.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            // Clauses watching ¬p are stored under p's index.
            let mut ws = std::mem::take(&mut self.watches[p.index()]);
            let false_lit = !p;
            let mut i = 0;
            let mut conflict = None;
            while i < ws.len() {
                let ci = ws[i];
                {
                    let c = &mut self.clauses[ci];
                    if c[0] == false_lit {
                        c.swap(0, 1);
                    }
                }
                let first = self.clauses[ci][0];
                if self.value(first) == Some(true) {
                    i += 1;
                    continue;
                }
                let len = self.clauses[ci].len();
                let mut moved = false;
                for k in 2..len {
                    let l = self.clauses[ci][k];
                    if self.value(l) != Some(false) {
                        self.clauses[ci].swap(1, k);
                        self.watches[(!l).index()].push(ci);
                        ws.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                if self.value(first) == Some(false) {
                    conflict = Some(ci);
                    break;
                }
                self.enqueue(first, Some(ci));
                i += 1;
            }
            let rest = std::mem::take(&mut self.watches[p.index()]);
            ws.extend(rest);
            self.watches[p.index()] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn bump(&mut self, v: u32) {
        self.activity[v as usize] += self.var_inc;
        if self.activity[v as usize] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
            self.heap = self
                .activity
                .iter()
                .enumerate()
                .map(|(i, &a)| HeapEntry(a, i as u32))
                .collect();
        } else {
            self.heap.push(HeapEntry(self.activity[v as usize], v));
        }
    }

    fn analyze(&mut self, mut conflict: usize) -> (Vec<Lit>, usize) {
        let mut seen = vec![false; self.values.len()];
        let mut learnt = vec![Lit(0)];
        let mut counter = 0;
        let mut idx = self.trail.len();
        let mut p: Option<Lit> = None;
        loop {
            let clause = self.clauses[conflict].clone();
            let start = usize::from(p.is_some());
            for &q in &clause[start..] {
                let v = q.var() as usize;
                if !seen[v] && self.levels[v] > 0 {
                    seen[v] = true;
                    self.bump(q.var());
                    if self.levels[v] >= self.level() {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if seen[self.trail[idx].var() as usize] {
                    break;
                }
            }
            let lit = self.trail[idx];
            p = Some(lit);
            seen[lit.var() as usize] = false;
            counter -= 1;
            if counter == 0 {
                break;
            }
            conflict = self.reasons[lit.var() as usize].expect("implied literal has a reason");
        }
        learnt[0] = !p.expect("conflict at decision level");
        let back = if learnt.len() == 1 {
            0
        } else {
            let (mi, _) = learnt[1..]
                .iter()
                .enumerate()
                .max_by_key(|(_, l)| self.levels[l.var() as usize])
                .expect("non-empty");
            learnt.swap(1, mi + 1);
            self.levels[learnt[1].var() as usize]
        };
        self.var_inc *= 1.0 / 0.95;
        (learnt, back)
    }

    fn backtrack(&mut self, level: usize) {
        if self.level() <= level {
            return;
        }
        let lim = self.trail_lim[level];
        for l in self.trail.drain(lim..) {
            let v = l.var() as usize;
            self.values[v] = None;
            self.reasons[v] = None;
            self.heap.push(HeapEntry(self.activity[v], l.var()));
        }
        self.trail_lim.truncate(level);
        self.qhead = self.trail.len();
    }

    fn pick(&mut self) -> Option<u32> {
        while let Some(HeapEntry(_, v)) = self.heap.pop() {
            if self.values[v as usize].is_none() {
                return Some(v);
            }
        }
        (0..self.values.len() as u32).find(|&v| self.values[v as usize].is_none())
    }

    /// Solves the clause set; returns a satisfying assignment indexed by
    /// variable.
    pub fn solve(mut self) -> Option<Vec<bool>> {
        if self.inconsistent {
            return None;
        }
        for l in std::mem::take(&mut self.units) {
            if !self.enqueue(l, None) {
                return None;
            }
        }
        for v in 0..self.values.len() as u32 {
            self.heap.push(HeapEntry(0.0, v));
        }
        loop {
            if let Some(conflict) = self.propagate() {
                if self.level() == 0 {
                    return None;
                }
                let (learnt, back) = self.analyze(conflict);
                self.backtrack(back);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let idx = self.clauses.len();
                    self.watches[(!learnt[0]).index()].push(idx);
                    self.watches[(!learnt[1]).index()].push(idx);
                    let first = learnt[0];
                    self.clauses.push(learnt);
                    self.enqueue(first, Some(idx));
                }
            } else {
                match self.pick() {
                    None => {
                        return Some(self.values.iter().map(|v| v.unwrap_or(false)).collect());
                    }
                    Some(v) => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(Lit::new(v, false), None);
                    }
                }
            }
        }
    }
}
