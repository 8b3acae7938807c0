//! Legal sequential views: a linear extension of the order restricted to one
//! process's operations plus all writes, in which every read returns the
//! latest preceding write on its register.

use std::collections::HashSet;

use super::facts::Facts;
use super::relation::Relation;
use super::CheckError;
use crate::clock::ProcessId;
use crate::history::{EventKind, History};

/// Caps the total work of one check.
#[derive(Debug, Clone)]
pub(crate) struct Budget {
    limit: u64,
    used: u64,
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Budget { limit, used: 0 }
    }

    pub fn tick(&mut self) -> Result<(), CheckError> {
        self.used += 1;
        if self.used > self.limit {
            return Err(CheckError::SearchBudgetExceeded { budget: self.limit });
        }
        Ok(())
    }
}

/// Preference order for process `p`'s view. With recorded events this is
/// the order in which `p` observed things, which is legal for genuine runs;
/// otherwise operation ids.
pub(crate) fn ranks(history: &History, p: usize) -> Vec<u64> {
    if history.events.is_empty() {
        return (0..history.ops.len() as u64).collect();
    }
    let delivered_at: std::collections::BTreeMap<_, usize> = history
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind == EventKind::Deliver && e.pid == ProcessId(p))
        .map(|(i, e)| (e.stamp, i))
        .collect();
    history
        .ops
        .iter()
        .enumerate()
        .map(|(id, op)| {
            if op.is_read() {
                2 * op.invoked as u64 + 1
            } else {
                match op.message.and_then(|s| delivered_at.get(&s)) {
                    Some(&e) => 2 * (e as u64 + 1),
                    None => u64::MAX / 2 + id as u64,
                }
            }
        })
        .collect()
}

fn test(bits: &[u64], i: usize) -> bool {
    bits[i / 64] >> (i % 64) & 1 == 1
}

fn set(bits: &mut [u64], i: usize, on: bool) {
    if on {
        bits[i / 64] |= 1 << (i % 64);
    } else {
        bits[i / 64] &= !(1 << (i % 64));
    }
}

struct Search<'a> {
    f: &'a Facts,
    budget: &'a mut Budget,
    /// Global ids of the view, in preference order.
    nodes: Vec<usize>,
    /// Local index of each global op, if in the view.
    local: Vec<Option<usize>>,
    preds: Vec<Vec<u64>>,
    emitted: Vec<u64>,
    count: usize,
    writer: Vec<Option<usize>>,
    /// Emitted locals with the writer they displaced, for undo.
    trail: Vec<(usize, Option<usize>)>,
    failed: HashSet<(Vec<u64>, Vec<Option<usize>>)>,
}

impl Search<'_> {
    fn available(&self, x: usize) -> bool {
        !test(&self.emitted, x)
            && self.preds[x]
                .iter()
                .zip(&self.emitted)
                .all(|(p, e)| p & !e == 0)
    }

    fn emit(&mut self, x: usize) {
        let op = self.nodes[x];
        let reg = self.f.register[op];
        let prev = self.writer[reg];
        if self.f.is_write[op] {
            self.writer[reg] = Some(op);
        }
        set(&mut self.emitted, x, true);
        self.count += 1;
        self.trail.push((x, prev));
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (x, prev) = self.trail.pop().expect("trail is longer than mark");
            let op = self.nodes[x];
            self.writer[self.f.register[op]] = prev;
            set(&mut self.emitted, x, false);
            self.count -= 1;
        }
    }

    fn readable(&self, op: usize) -> bool {
        self.writer[self.f.register[op]] == self.f.source[op]
    }

    /// Some unemitted read can no longer return its value.
    fn dead(&self) -> bool {
        (0..self.nodes.len()).any(|x| {
            let op = self.nodes[x];
            if test(&self.emitted, x) || self.f.is_write[op] {
                return false;
            }
            match self.f.source[op] {
                None => self.writer[self.f.register[op]].is_some(),
                Some(w) => {
                    let lw = self.local[w].expect("writes are in every view");
                    test(&self.emitted, lw) && !self.readable(op)
                }
            }
        })
    }

    /// Emitting this write would strand an unemitted read of the current value.
    fn strands_a_read(&self, op: usize) -> bool {
        let reg = self.f.register[op];
        self.f.reads_on[reg].iter().any(|&r| {
            self.local[r].is_some_and(|lr| !test(&self.emitted, lr))
                && self.f.source[r] == self.writer[reg]
        })
    }

    fn run(&mut self) -> Result<bool, CheckError> {
        self.budget.tick()?;
        let mark = self.trail.len();
        // Emitting a read as soon as it is legal never hurts.
        loop {
            let next = (0..self.nodes.len()).find(|&x| {
                let op = self.nodes[x];
                self.f.is_read(op) && self.available(x) && self.readable(op)
            });
            match next {
                Some(x) => self.emit(x),
                None => break,
            }
        }
        if self.count == self.nodes.len() {
            return Ok(true);
        }
        let key = (self.emitted.clone(), self.writer.clone());
        if self.dead() || self.failed.contains(&key) {
            self.undo_to(mark);
            return Ok(false);
        }
        for x in 0..self.nodes.len() {
            let op = self.nodes[x];
            if self.f.is_write[op] && self.available(x) && !self.strands_a_read(op) {
                let inner = self.trail.len();
                self.emit(x);
                if self.run()? {
                    return Ok(true);
                }
                self.undo_to(inner);
            }
        }
        self.failed.insert(key);
        self.undo_to(mark);
        Ok(false)
    }
}

/// A legal linear extension of `order` restricted to process `p`'s view,
/// preferring low `rank` first, or `None` if there is none.
pub(crate) fn linearize(
    f: &Facts,
    order: &Relation,
    p: usize,
    rank: &[u64],
    budget: &mut Budget,
) -> Result<Option<Vec<usize>>, CheckError> {
    let mut nodes = f.view(p);
    nodes.sort_by_key(|&o| (rank[o], o));
    let mut local = vec![None; f.len()];
    for (i, &o) in nodes.iter().enumerate() {
        local[o] = Some(i);
    }
    let words = nodes.len().div_ceil(64).max(1);
    let preds = nodes
        .iter()
        .map(|&b| {
            let mut bits = vec![0; words];
            for (i, &a) in nodes.iter().enumerate() {
                if order.precedes(a, b) {
                    set(&mut bits, i, true);
                }
            }
            bits
        })
        .collect();
    let mut s = Search {
        f,
        budget,
        nodes,
        local,
        preds,
        emitted: vec![0; words],
        count: 0,
        writer: vec![None; f.register_count],
        trail: Vec::new(),
        failed: HashSet::new(),
    };
    if s.run()? {
        Ok(Some(s.trail.iter().map(|&(x, _)| s.nodes[x]).collect()))
    } else {
        Ok(None)
    }
}
