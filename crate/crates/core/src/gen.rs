//! Random and exhaustive inputs for property tests and demos.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::ProximityGraph;
use crate::history::{History, OpKind};
use crate::sim::{Instruction, Program};

const REGISTERS: [&str; 3] = ["X", "Y", "Z"];

/// A random proximity graph; empty and complete graphs are drawn often.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize) -> ProximityGraph {
    match rng.gen_range(0..4) {
        0 => ProximityGraph::empty(n),
        1 => ProximityGraph::complete(n),
        _ => {
            let mut g = ProximityGraph::empty(n);
            for p in 0..n {
                for q in p + 1..n {
                    if rng.gen_bool(0.5) {
                        g.add_edge(p.into(), q.into())
                            .expect("p and q are distinct and in range");
                    }
                }
            }
            g
        }
    }
}

/// One program per process with at most `max_broadcasts` writes and raw
/// broadcasts in total. Written values are unique across the run.
pub fn random_programs<R: Rng>(rng: &mut R, n: usize, max_broadcasts: usize) -> Vec<Program> {
    let registers = &REGISTERS[..rng.gen_range(1..=REGISTERS.len())];
    let mut programs = vec![Vec::new(); n];
    let broadcasts = rng.gen_range(1..=max_broadcasts.max(1));
    let mut value = 0;
    for _ in 0..broadcasts {
        let p = rng.gen_range(0..n);
        while rng.gen_bool(0.4) {
            let ins = match rng.gen_range(0..6) {
                0 => Instruction::Sleep {
                    ticks: rng.gen_range(0..15),
                },
                _ => Instruction::read(registers.choose(rng).expect("nonempty")),
            };
            programs[p].push(ins);
        }
        value += 1;
        programs[p].push(if rng.gen_bool(0.1) {
            Instruction::Broadcast { tag: value as u64 }
        } else {
            Instruction::write(registers.choose(rng).expect("nonempty"), value)
        });
    }
    for program in &mut programs {
        if rng.gen_bool(0.5) {
            program.push(Instruction::read(registers.choose(rng).expect("nonempty")));
        }
    }
    programs
}

/// A random history without events. Reads return the initial value or any
/// value written to their register, so many histories are inconsistent.
pub fn random_history<R: Rng>(rng: &mut R, n: usize, max_ops: usize) -> History {
    let registers = &REGISTERS[..rng.gen_range(1..=2)];
    let len = rng.gen_range(1..=max_ops);
    let kinds: Vec<(usize, bool, &str)> = (0..len)
        .map(|_| {
            (
                rng.gen_range(0..n),
                rng.gen_bool(0.5),
                *registers.choose(rng).expect("nonempty"),
            )
        })
        .collect();
    let mut written: Vec<Vec<i64>> = vec![Vec::new(); registers.len()];
    let reg_index = |r: &str| {
        registers
            .iter()
            .position(|x| *x == r)
            .expect("known register")
    };
    let mut values = Vec::new();
    for (i, &(_, is_write, reg)) in kinds.iter().enumerate() {
        if is_write {
            let v = i as i64 + 1;
            written[reg_index(reg)].push(v);
            values.push(Some(v));
        } else {
            values.push(None);
        }
    }
    let mut h = History::new(n);
    for (i, &(pid, is_write, reg)) in kinds.iter().enumerate() {
        if is_write {
            h.write(pid, reg, values[i].expect("writes have values"));
        } else {
            let options = &written[reg_index(reg)];
            let pick = rng.gen_range(0..=options.len());
            h.read(pid, reg, options.get(pick).copied());
        }
    }
    h
}

/// Every history with at most `max_ops` operations over `n` processes and
/// the first `registers` registers, up to renaming of written values.
/// Each process's operations appear in id order.
pub fn all_histories(n: usize, max_ops: usize, registers: usize) -> Vec<History> {
    let registers = &REGISTERS[..registers];
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    // Shapes: (pid, is_write, register) per op, grouped by pid so that each
    // distinct set of programs is produced once.
    let mut shape = Vec::new();
    fn shapes(
        n: usize,
        regs: usize,
        left: usize,
        shape: &mut Vec<(usize, bool, usize)>,
        out: &mut Vec<Vec<(usize, bool, usize)>>,
    ) {
        out.push(shape.clone());
        if left == 0 {
            return;
        }
        let min_pid = shape.last().map_or(0, |s| s.0);
        for pid in min_pid..n {
            for is_write in [true, false] {
                for reg in 0..regs {
                    shape.push((pid, is_write, reg));
                    shapes(n, regs, left - 1, shape, out);
                    shape.pop();
                }
            }
        }
    }
    let mut all_shapes = Vec::new();
    shapes(n, registers.len(), max_ops, &mut shape, &mut all_shapes);
    for shape in all_shapes.into_iter().filter(|s| !s.is_empty()) {
        let mut writes_on: Vec<Vec<i64>> = vec![Vec::new(); registers.len()];
        for (i, &(_, w, r)) in shape.iter().enumerate() {
            if w {
                writes_on[r].push(i as i64 + 1);
            }
        }
        let reads: Vec<usize> = (0..shape.len()).filter(|&i| !shape[i].1).collect();
        let choices: Vec<usize> = reads
            .iter()
            .map(|&i| writes_on[shape[i].2].len() + 1)
            .collect();
        let mut pick = vec![0; reads.len()];
        loop {
            let mut h = History::new(n);
            let mut k = 0;
            for (i, &(pid, w, r)) in shape.iter().enumerate() {
                if w {
                    h.write(pid, registers[r], i as i64 + 1);
                } else {
                    h.read(pid, registers[r], writes_on[r].get(pick[k]).copied());
                    k += 1;
                }
            }
            let key: Vec<(usize, OpKind)> =
                h.ops.iter().map(|o| (o.pid.0, o.kind.clone())).collect();
            if seen.insert(key) {
                out.push(h);
            }
            // Odometer over read choices.
            let mut d = 0;
            while d < pick.len() {
                pick[d] += 1;
                if pick[d] < choices[d] {
                    break;
                }
                pick[d] = 0;
                d += 1;
            }
            if d == pick.len() {
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_histories_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let n = rng.gen_range(1..=3);
            random_history(&mut rng, n, 8).validate().unwrap();
        }
    }

    #[test]
    fn exhaustive_enumeration_is_complete_for_tiny_cases() {
        // One process, one op: write, or read of the initial value.
        assert_eq!(all_histories(1, 1, 1).len(), 2);
        // Two ops on one register, one process: ww, wr(2 choices), rw(2), rr(1).
        assert_eq!(all_histories(1, 2, 1).len(), 2 + 1 + 2 + 2 + 1);
        for h in all_histories(2, 3, 2) {
            h.validate().unwrap();
        }
    }

    #[test]
    fn programs_respect_the_broadcast_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let programs = random_programs(&mut rng, 4, 40);
            let b = programs
                .iter()
                .flatten()
                .filter(|i| matches!(i, Instruction::Write { .. } | Instruction::Broadcast { .. }))
                .count();
            assert!((1..=40).contains(&b));
        }
    }
}
