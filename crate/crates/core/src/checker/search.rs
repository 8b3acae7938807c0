//! Exact search for an order that totally orders neighbor pairs and admits
//! a legal view at every process.

use super::causal::causal_violation;
use super::extend::by_position;
use super::facts::Facts;
use super::linearize::{linearize, Budget};
use super::relation::Relation;
use super::CheckError;
use crate::graph::ProximityGraph;

pub(crate) enum Outcome {
    Found {
        order: Relation,
        views: Vec<Vec<usize>>,
    },
    /// Even the causal order alone leaves this process without a legal view.
    NoView(usize),
    Exhausted,
}

struct Ctx<'a> {
    f: &'a Facts,
    pairs: Vec<(usize, usize)>,
    ranks: &'a [Vec<u64>],
    budget: &'a mut Budget,
}

/// Branches on both orientations of every unordered neighbor pair. Each
/// node is pruned unless its order is causal and every process still has a
/// legal view; both properties only get harder as edges are added.
pub(crate) fn search(
    f: &Facts,
    graph: &ProximityGraph,
    base: Relation,
    ranks: &[Vec<u64>],
    budget: &mut Budget,
) -> Result<Outcome, CheckError> {
    let mut ctx = Ctx {
        f,
        pairs: f.neighbor_pairs(graph),
        ranks,
        budget,
    };
    if causal_violation(f, &base).is_some() {
        return Ok(Outcome::Exhausted);
    }
    let views = match views(&mut ctx, &base)? {
        Ok(v) => v,
        Err(p) => return Ok(Outcome::NoView(p)),
    };
    Ok(match go(&mut ctx, base, views, 0)? {
        Some((order, views)) => Outcome::Found { order, views },
        None => Outcome::Exhausted,
    })
}

type Views = Vec<Vec<usize>>;

/// A legal view per process, or the first process without one.
fn views(ctx: &mut Ctx<'_>, order: &Relation) -> Result<Result<Views, usize>, CheckError> {
    let mut out = Vec::with_capacity(ctx.f.n);
    for p in 0..ctx.f.n {
        match linearize(ctx.f, order, p, &ctx.ranks[p], ctx.budget)? {
            Some(v) => out.push(v),
            None => return Ok(Err(p)),
        }
    }
    Ok(Ok(out))
}

fn go(
    ctx: &mut Ctx<'_>,
    order: Relation,
    views: Views,
    from: usize,
) -> Result<Option<(Relation, Views)>, CheckError> {
    ctx.budget.tick()?;
    let Some(i) = (from..ctx.pairs.len()).find(|&i| {
        let (a, b) = ctx.pairs[i];
        !order.comparable(a, b)
    }) else {
        return Ok(Some((order, views)));
    };
    let (a, b) = ctx.pairs[i];
    let first = preferred(ctx.f, &views, a, b);
    for (x, y) in [first, (first.1, first.0)] {
        let mut next = order.clone();
        next.add(x, y)
            .expect("incomparable pairs never close a cycle");
        if causal_violation(ctx.f, &next).is_some() {
            continue;
        }
        if let Ok(v) = views_for(ctx, &next, &views)? {
            if let Some(found) = go(ctx, next, v, i + 1)? {
                return Ok(Some(found));
            }
        }
    }
    Ok(None)
}

/// Recomputes only the views the new order invalidates.
fn views_for(
    ctx: &mut Ctx<'_>,
    order: &Relation,
    old: &Views,
) -> Result<Result<Views, usize>, CheckError> {
    let mut out = Vec::with_capacity(old.len());
    for (p, view) in old.iter().enumerate() {
        if respects(order, view) {
            out.push(view.clone());
            continue;
        }
        match linearize(ctx.f, order, p, &ctx.ranks[p], ctx.budget)? {
            Some(v) => out.push(v),
            None => return Ok(Err(p)),
        }
    }
    Ok(Ok(out))
}

fn respects(order: &Relation, seq: &[usize]) -> bool {
    seq.iter()
        .enumerate()
        .all(|(i, &b)| seq[..i].iter().all(|&a| !order.precedes(b, a)))
}

/// The orientation the current views already agree with, if any view holds
/// both operations; otherwise invocation order.
fn preferred(f: &Facts, views: &Views, a: usize, b: usize) -> (usize, usize) {
    for view in views {
        let pa = view.iter().position(|&o| o == a);
        let pb = view.iter().position(|&o| o == b);
        if let (Some(x), Some(y)) = (pa, pb) {
            return if x < y { (a, b) } else { (b, a) };
        }
    }
    by_position(f, a, b)
}
