//! The sequential asset-transfer object: the reference semantics every
//! concurrent implementation is checked against.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::hash::Hash;

use crate::model::{AccountId, Amount, ModelError, OwnerMap, ProcessId};

/// A sequential object type. `apply` is the transition relation, which for
/// the types used here is a total function of (state, process, operation).
pub trait SequentialSpec {
    type State: Clone + Eq + Hash + Debug;
    type Op: Clone + Debug;
    type Ret: Clone + PartialEq + Debug;

    fn initial(&self) -> Self::State;

    fn apply(
        &self,
        state: &Self::State,
        process: ProcessId,
        op: &Self::Op,
    ) -> Result<(Self::State, Self::Ret), ModelError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operation {
    Transfer {
        source: AccountId,
        dest: AccountId,
        amount: Amount,
    },
    Read {
        account: AccountId,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Response {
    Success(bool),
    Balance(Amount),
}

/// Account balances; the object state.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Balances(BTreeMap<AccountId, Amount>);

impl Balances {
    pub fn new(balances: BTreeMap<AccountId, Amount>) -> Self {
        Balances(balances)
    }

    pub fn get(&self, account: AccountId) -> Result<Amount, ModelError> {
        self.0
            .get(&account)
            .copied()
            .ok_or(ModelError::UnknownAccount(account))
    }

    pub fn iter(&self) -> impl Iterator<Item = (AccountId, Amount)> + '_ {
        self.0.iter().map(|(a, x)| (*a, *x))
    }

    /// One transition of the type: a transfer succeeds iff `process` owns the
    /// source and the source covers the amount; reads never change state.
    pub fn apply(
        &self,
        process: ProcessId,
        op: &Operation,
        owners: &OwnerMap,
    ) -> Result<(Balances, Response), ModelError> {
        match *op {
            Operation::Read { account } => Ok((self.clone(), Response::Balance(self.get(account)?))),
            Operation::Transfer {
                source,
                dest,
                amount,
            } => {
                let available = self.get(source)?;
                self.get(dest)?;
                if !owners.is_owner(process, source) || available < amount {
                    return Ok((self.clone(), Response::Success(false)));
                }
                let mut next = self.clone();
                // Debit first so that a self-transfer nets to zero.
                next.0.insert(source, available - amount);
                let credited = next.0[&dest]
                    .checked_add(amount)
                    .ok_or(ModelError::Overflow(dest))?;
                next.0.insert(dest, credited);
                Ok((next, Response::Success(true)))
            }
        }
    }
}

/// Asset-transfer object over a fixed account set and owner map.
#[derive(Clone, Debug)]
pub struct AssetTransferObject {
    pub owners: OwnerMap,
    pub initial: Balances,
}

impl AssetTransferObject {
    /// Accounts missing from `initial` start at zero; accounts in `initial`
    /// but not in `owners` become receive-only.
    pub fn new(mut owners: OwnerMap, initial: BTreeMap<AccountId, Amount>) -> Self {
        let mut balances = initial;
        for a in owners.accounts().collect::<Vec<_>>() {
            balances.entry(a).or_insert(0);
        }
        for a in balances.keys() {
            owners.add_account(*a);
        }
        AssetTransferObject {
            owners,
            initial: Balances(balances),
        }
    }
}

impl SequentialSpec for AssetTransferObject {
    type State = Balances;
    type Op = Operation;
    type Ret = Response;

    fn initial(&self) -> Balances {
        self.initial.clone()
    }

    fn apply(
        &self,
        state: &Balances,
        process: ProcessId,
        op: &Operation,
    ) -> Result<(Balances, Response), ModelError> {
        state.apply(process, op, &self.owners)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn object() -> AssetTransferObject {
        let mut owners = OwnerMap::single_owner(2);
        owners.set_owners(AccountId(2), []);
        AssetTransferObject::new(
            owners,
            [(AccountId(0), 10), (AccountId(1), 3)].into_iter().collect(),
        )
    }

    fn transfer(s: u32, d: u32, x: Amount) -> Operation {
        Operation::Transfer {
            source: AccountId(s),
            dest: AccountId(d),
            amount: x,
        }
    }

    #[test]
    fn owner_with_funds_succeeds() {
        let obj = object();
        let (next, r) = obj.apply(&obj.initial(), ProcessId(0), &transfer(0, 1, 4)).unwrap();
        assert_eq!(r, Response::Success(true));
        assert_eq!(next.get(AccountId(0)), Ok(6));
        assert_eq!(next.get(AccountId(1)), Ok(7));
        assert_eq!(next.get(AccountId(2)), Ok(0));
    }

    #[test]
    fn insufficient_balance_fails_without_change() {
        let obj = object();
        let s0 = obj.initial();
        let (next, r) = obj.apply(&s0, ProcessId(1), &transfer(1, 0, 4)).unwrap();
        assert_eq!(r, Response::Success(false));
        assert_eq!(next, s0);
    }

    #[test]
    fn non_owner_fails_without_change() {
        let obj = object();
        let s0 = obj.initial();
        let (next, r) = obj.apply(&s0, ProcessId(1), &transfer(0, 1, 1)).unwrap();
        assert_eq!(r, Response::Success(false));
        assert_eq!(next, s0);
        // Nobody owns the sink account.
        let (_, r) = obj.apply(&s0, ProcessId(0), &transfer(2, 0, 0)).unwrap();
        assert_eq!(r, Response::Success(false));
    }

    #[test]
    fn read_returns_balance_and_unknown_account_errors() {
        let obj = object();
        let s0 = obj.initial();
        let (_, r) = obj
            .apply(&s0, ProcessId(1), &Operation::Read { account: AccountId(0) })
            .unwrap();
        assert_eq!(r, Response::Balance(10));
        assert_eq!(
            obj.apply(&s0, ProcessId(1), &Operation::Read { account: AccountId(7) }),
            Err(ModelError::UnknownAccount(AccountId(7)))
        );
    }

    #[test]
    fn zero_and_self_transfers_are_legal() {
        let obj = object();
        let s0 = obj.initial();
        let (s1, r) = obj.apply(&s0, ProcessId(0), &transfer(0, 1, 0)).unwrap();
        assert_eq!(r, Response::Success(true));
        assert_eq!(s1, s0);
        let (s2, r) = obj.apply(&s0, ProcessId(0), &transfer(0, 0, 10)).unwrap();
        assert_eq!(r, Response::Success(true));
        assert_eq!(s2, s0);
    }

    #[test]
    fn credit_overflow_is_an_error() {
        let owners = OwnerMap::single_owner(2);
        let obj = AssetTransferObject::new(
            owners,
            [(AccountId(0), 1), (AccountId(1), Amount::MAX)].into_iter().collect(),
        );
        assert_eq!(
            obj.apply(&obj.initial(), ProcessId(0), &transfer(0, 1, 1)),
            Err(ModelError::Overflow(AccountId(1)))
        );
    }
}
