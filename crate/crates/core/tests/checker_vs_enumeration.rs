//! The memoized linearizability search must agree with naive enumeration of
//! every ordering on small histories.

use at2_core::{
    check_linearizable, AccountId, Amount, AssetTransferObject, History, Operation, OwnerMap,
    ProcessId, Response, SearchBudget, SequentialSpec, Verdict,
};
use proptest::prelude::*;

fn brute_force(spec: &AssetTransferObject, h: &History<Operation, Response>) -> bool {
    let ops = h.operations();
    let n = ops.len();
    // Choose which pending operations take effect, then try every order.
    let pending: Vec<usize> = (0..n).filter(|&i| ops[i].returned.is_none()).collect();
    for mask in 0..(1u32 << pending.len()) {
        let mut chosen: Vec<usize> = (0..n).filter(|i| ops[*i].returned.is_some()).collect();
        for (k, &p) in pending.iter().enumerate() {
            if mask & (1 << k) != 0 {
                chosen.push(p);
            }
        }
        if permutations(&chosen).into_iter().any(|perm| legal(spec, &ops, &perm)) {
            return true;
        }
    }
    false
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn legal(
    spec: &AssetTransferObject,
    ops: &[at2_core::history::OpRecord<Operation, Response>],
    order: &[usize],
) -> bool {
    // Real-time: if a returned before b was invoked, a must come first.
    for (x, &a) in order.iter().enumerate() {
        for &b in &order[x + 1..] {
            if let Some((ret_at, _)) = ops[b].returned {
                if ret_at < ops[a].invoked_at {
                    return false;
                }
            }
        }
    }
    let mut state = spec.initial();
    for &i in order {
        let (next, ret) = spec.apply(&state, ops[i].process, &ops[i].op).unwrap();
        if let Some((_, expected)) = &ops[i].returned {
            if *expected != ret {
                return false;
            }
        }
        state = next;
    }
    true
}

#[derive(Clone, Debug)]
enum Step {
    Invoke(u32, Operation),
    Return(u32, Response),
}

fn op_strategy() -> impl Strategy<Value = Operation> {
    prop_oneof![
        (0u32..2, 0u32..3, 0u64..4).prop_map(|(s, d, x)| Operation::Transfer {
            source: AccountId(s),
            dest: AccountId(d),
            amount: x
        }),
        (0u32..3).prop_map(|a| Operation::Read { account: AccountId(a) }),
    ]
}

fn ret_strategy() -> impl Strategy<Value = Response> {
    prop_oneof![
        any::<bool>().prop_map(Response::Success),
        (0u64..6).prop_map(Response::Balance),
    ]
}

/// Random well-formed history over three processes with at most six ops.
fn history_strategy() -> impl Strategy<Value = History<Operation, Response>> {
    proptest::collection::vec((0u32..3, op_strategy(), ret_strategy(), any::<bool>()), 1..14)
        .prop_map(|raw| {
            let mut h = History::new();
            let mut invoked = 0;
            let mut pending: [Option<Operation>; 3] = [None, None, None];
            let mut steps = Vec::new();
            for (p, op, ret, prefer_return) in raw {
                let slot = &mut pending[p as usize];
                match slot.take() {
                    Some(op_pending) => {
                        // Responses are sometimes the truthful sequential answer
                        // and sometimes arbitrary.
                        let ret = if prefer_return {
                            match op_pending {
                                Operation::Read { .. } => ret,
                                Operation::Transfer { .. } => match ret {
                                    Response::Balance(_) => Response::Success(true),
                                    r => r,
                                },
                            }
                        } else {
                            match op_pending {
                                Operation::Read { .. } => match ret {
                                    Response::Success(_) => Response::Balance(0),
                                    r => r,
                                },
                                Operation::Transfer { .. } => Response::Success(prefer_return),
                            }
                        };
                        steps.push(Step::Return(p, ret));
                    }
                    None if invoked < 6 => {
                        invoked += 1;
                        *slot = Some(op);
                        steps.push(Step::Invoke(p, op));
                    }
                    None => {}
                }
            }
            for s in steps {
                match s {
                    Step::Invoke(p, op) => h.invoke(ProcessId(p), op).unwrap(),
                    Step::Return(p, r) => h.respond(ProcessId(p), r).unwrap(),
                }
            }
            h
        })
}

fn spec() -> AssetTransferObject {
    let mut owners = OwnerMap::single_owner(2);
    owners.set_owners(AccountId(2), []);
    AssetTransferObject::new(
        owners,
        [(AccountId(0), 3 as Amount), (AccountId(1), 1)].into_iter().collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]
    #[test]
    fn search_agrees_with_enumeration(h in history_strategy()) {
        let spec = spec();
        let fast = check_linearizable(&spec, &h, SearchBudget::default()).unwrap();
        let slow = brute_force(&spec, &h);
        prop_assert_ne!(fast, Verdict::Inconclusive);
        prop_assert_eq!(fast == Verdict::Linearizable, slow, "history: {:?}", h.events());
    }
}

#[test]
fn enumeration_finds_both_orderings_of_double_spend_illegal() {
    let spec = AssetTransferObject::new(
        OwnerMap::single_owner(2),
        [(AccountId(0), 1)].into_iter().collect(),
    );
    let t = Operation::Transfer {
        source: AccountId(0),
        dest: AccountId(1),
        amount: 1,
    };
    let mut h = History::new();
    h.invoke(ProcessId(0), t).unwrap();
    h.invoke(ProcessId(1), t).unwrap();
    h.respond(ProcessId(0), Response::Success(true)).unwrap();
    h.respond(ProcessId(1), Response::Success(true)).unwrap();
    assert!(!brute_force(&spec, &h));
    assert_eq!(
        check_linearizable(&spec, &h, SearchBudget::default()).unwrap(),
        Verdict::NotLinearizable
    );
}
