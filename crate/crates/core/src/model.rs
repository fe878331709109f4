use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Asset amounts are whole units.
pub type Amount = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("amount overflow while crediting account {0}")]
    Overflow(AccountId),
    #[error("transfer {transfer} does not involve account {account}")]
    NotInvolved { account: AccountId, transfer: Transfer },
    #[error("conflicting transfers for {id}: {existing} vs {incoming}")]
    Conflict {
        id: TransferId,
        existing: Transfer,
        incoming: Transfer,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessId(pub u32);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// In the message-passing setting every process owns exactly the account
/// with its own index, so the conversion is the identity on the index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountId(pub u32);

impl From<ProcessId> for AccountId {
    fn from(p: ProcessId) -> Self {
        AccountId(p.0)
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// Identity of a transfer: its source account and the per-source sequence
/// number. Two transfers sharing an id but differing elsewhere conflict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransferId {
    pub source: AccountId,
    pub seq: u64,
}

impl fmt::Display for TransferId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.source, self.seq)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transfer {
    pub source: AccountId,
    pub seq: u64,
    pub dest: AccountId,
    pub amount: Amount,
}

impl Transfer {
    pub fn new(source: AccountId, dest: AccountId, amount: Amount, seq: u64) -> Self {
        Transfer {
            source,
            seq,
            dest,
            amount,
        }
    }

    pub fn id(&self) -> TransferId {
        TransferId {
            source: self.source,
            seq: self.seq,
        }
    }

    pub fn involves(&self, account: AccountId) -> bool {
        self.source == account || self.dest == account
    }

    pub fn conflicts_with(&self, other: &Transfer) -> bool {
        self.id() == other.id() && self != other
    }
}

impl fmt::Display for Transfer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}->{}, {}, s={})",
            self.source, self.dest, self.amount, self.seq
        )
    }
}

/// The payload of a secure broadcast: a transfer together with the incoming
/// transfers it depends on.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransferMessage {
    pub transfer: Transfer,
    pub deps: BTreeSet<Transfer>,
}

impl TransferMessage {
    pub fn new(transfer: Transfer, deps: BTreeSet<Transfer>) -> Self {
        TransferMessage { transfer, deps }
    }

    /// Every dependency must be incoming to the issuing account. Messages from
    /// Byzantine processes may violate this; validation then fails later.
    pub fn is_well_formed(&self) -> bool {
        self.deps.iter().all(|d| d.dest == self.transfer.source)
    }
}

/// Initial balance plus incoming minus outgoing amounts of `account` over
/// `history`, which is treated as a set: callers must not pass duplicates.
///
/// The result is signed because adversarial histories can overdraw.
pub fn balance<'a, I>(account: AccountId, history: I, initial: Amount) -> i128
where
    I: IntoIterator<Item = &'a Transfer>,
{
    history
        .into_iter()
        .fold(initial as i128, |acc, t| {
            let mut acc = acc;
            if t.dest == account {
                acc += t.amount as i128;
            }
            if t.source == account {
                acc -= t.amount as i128;
            }
            acc
        })
}

/// Transfers involving a single account, keyed by transfer id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct AccountHistory {
    account: Option<AccountId>,
    transfers: BTreeMap<TransferId, Transfer>,
}

impl AccountHistory {
    pub fn new(account: AccountId) -> Self {
        AccountHistory {
            account: Some(account),
            transfers: BTreeMap::new(),
        }
    }

    pub fn account(&self) -> Option<AccountId> {
        self.account
    }

    /// Inserts `t`; returns `Ok(false)` if it was already present.
    pub fn insert(&mut self, t: Transfer) -> Result<bool, ModelError> {
        if let Some(account) = self.account {
            if !t.involves(account) {
                return Err(ModelError::NotInvolved {
                    account,
                    transfer: t,
                });
            }
        }
        match self.transfers.get(&t.id()) {
            Some(existing) if *existing == t => Ok(false),
            Some(existing) => Err(ModelError::Conflict {
                id: t.id(),
                existing: *existing,
                incoming: t,
            }),
            None => {
                self.transfers.insert(t.id(), t);
                Ok(true)
            }
        }
    }

    pub fn contains(&self, t: &Transfer) -> bool {
        self.transfers.get(&t.id()) == Some(t)
    }

    pub fn get(&self, id: &TransferId) -> Option<&Transfer> {
        self.transfers.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transfer> {
        self.transfers.values()
    }

    pub fn len(&self) -> usize {
        self.transfers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transfers.is_empty()
    }

    pub fn contains_all<'a, I>(&self, transfers: I) -> bool
    where
        I: IntoIterator<Item = &'a Transfer>,
    {
        transfers.into_iter().all(|t| self.contains(t))
    }

    pub fn outgoing(&self) -> impl Iterator<Item = &Transfer> {
        let account = self.account;
        self.transfers
            .values()
            .filter(move |t| Some(t.source) == account)
    }

    pub fn incoming(&self) -> impl Iterator<Item = &Transfer> {
        let account = self.account;
        self.transfers
            .values()
            .filter(move |t| Some(t.dest) == account && t.source != t.dest)
    }

    pub fn balance(&self, initial: Amount) -> i128 {
        match self.account {
            Some(a) => balance(a, self.iter(), initial),
            None => initial as i128,
        }
    }

    /// True when the outgoing sequence numbers are exactly `1..=k`.
    pub fn outgoing_contiguous(&self) -> bool {
        self.outgoing()
            .map(|t| t.seq)
            .zip(1u64..)
            .all(|(seq, expected)| seq == expected)
    }

    pub fn to_set(&self) -> BTreeSet<Transfer> {
        self.transfers.values().copied().collect()
    }
}

/// Maps each account to the processes allowed to debit it. An empty owner
/// set marks a receive-only account.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OwnerMap {
    owners: BTreeMap<AccountId, BTreeSet<ProcessId>>,
}

impl OwnerMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Account `i` owned by process `i`, for `i` in `0..n`.
    pub fn single_owner(n: u32) -> Self {
        let mut map = OwnerMap::new();
        for i in 0..n {
            map.set_owners(AccountId(i), [ProcessId(i)]);
        }
        map
    }

    pub fn set_owners<I>(&mut self, account: AccountId, owners: I)
    where
        I: IntoIterator<Item = ProcessId>,
    {
        self.owners.insert(account, owners.into_iter().collect());
    }

    pub fn add_account(&mut self, account: AccountId) {
        self.owners.entry(account).or_default();
    }

    pub fn owners(&self, account: AccountId) -> Result<&BTreeSet<ProcessId>, ModelError> {
        self.owners
            .get(&account)
            .ok_or(ModelError::UnknownAccount(account))
    }

    pub fn is_owner(&self, p: ProcessId, account: AccountId) -> bool {
        self.owners
            .get(&account)
            .is_some_and(|owners| owners.contains(&p))
    }

    pub fn contains(&self, account: AccountId) -> bool {
        self.owners.contains_key(&account)
    }

    pub fn accounts(&self) -> impl Iterator<Item = AccountId> + '_ {
        self.owners.keys().copied()
    }

    pub fn owned_by(&self, p: ProcessId) -> impl Iterator<Item = AccountId> + '_ {
        self.owners
            .iter()
            .filter(move |(_, o)| o.contains(&p))
            .map(|(a, _)| *a)
    }

    /// Largest owner set over all accounts.
    pub fn k_sharedness(&self) -> usize {
        self.owners.values().map(BTreeSet::len).max().unwrap_or(0)
    }
}
