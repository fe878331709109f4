//! Trace-level property checks shared by tests, the acceptance suite and the
//! CLI.

use std::collections::{BTreeMap, BTreeSet};

use at2_core::{ProcessId, Transfer, TransferId};

/// True if for every source the delivered sequences of all processes are
/// prefixes of one another.
pub fn source_order<P: PartialEq>(logs: &[&BTreeMap<ProcessId, Vec<P>>]) -> bool {
    let sources: BTreeSet<ProcessId> = logs.iter().flat_map(|l| l.keys().copied()).collect();
    sources.iter().all(|s| {
        let seqs: Vec<&[P]> = logs
            .iter()
            .map(|l| l.get(s).map_or(&[][..], Vec::as_slice))
            .collect();
        seqs.iter().all(|a| {
            seqs.iter().all(|b| {
                let k = a.len().min(b.len());
                a[..k] == b[..k]
            })
        })
    })
}

/// True if all logs are equal.
pub fn all_equal<T: PartialEq>(items: &[T]) -> bool {
    items.windows(2).all(|w| w[0] == w[1])
}

/// Pairs of distinct transfers applied under the same `(source, seq)` by
/// correct processes, anywhere in the trace.
pub fn conflicting_applications<'a, I>(applied: I) -> Vec<(Transfer, Transfer)>
where
    I: IntoIterator<Item = (ProcessId, &'a Transfer)>,
{
    let mut first: BTreeMap<TransferId, Transfer> = BTreeMap::new();
    let mut conflicts = BTreeSet::new();
    for (_, t) in applied {
        match first.get(&t.id()) {
            Some(seen) if seen != t => {
                conflicts.insert((*seen, *t));
            }
            Some(_) => {}
            None => {
                first.insert(t.id(), *t);
            }
        }
    }
    conflicts.into_iter().collect()
}

/// True if every process applied its own transfers in issue order, i.e.
/// outgoing sequence numbers `1..=k` with nothing skipped.
pub fn contiguous_outgoing<'a, I>(seqs: I) -> bool
where
    I: IntoIterator<Item = &'a [u64]>,
{
    seqs.into_iter()
        .all(|s| s.iter().enumerate().all(|(i, &q)| q == i as u64 + 1))
}
