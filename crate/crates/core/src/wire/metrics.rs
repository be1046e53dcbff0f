// SPDX-License-Identifier: Apache-2.0
//! Attestation metrics `M_A`: claim name to measurement octets.

use std::collections::BTreeMap;

use super::buf::{put_var, Reader};
use super::WireError;

/// Encoded as `count (u16) ‖ { len ‖ name ‖ len ‖ value }*` with names in
/// strictly ascending byte order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metrics {
    pub claims: BTreeMap<String, Vec<u8>>,
}

impl Metrics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<Vec<u8>>) -> Self {
        self.claims.insert(name.into(), value.into());
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, value: impl Into<Vec<u8>>) {
        self.claims.insert(name.into(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.claims.get(name).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.claims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.claims.is_empty()
    }

    pub fn encode(&self) -> Vec<u8> {
        let count = u16::try_from(self.claims.len()).expect("too many claims");
        let mut out = count.to_be_bytes().to_vec();
        for (name, value) in &self.claims {
            put_var(&mut out, name.as_bytes());
            put_var(&mut out, value);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let count = u16::from_be_bytes(r.take_array::<2>("metrics count")?);
        let mut claims = BTreeMap::new();
        let mut last: Option<&str> = None;
        for _ in 0..count {
            let name = std::str::from_utf8(r.take_var("claim name")?)
                .map_err(|_| WireError::format("claim name is not UTF-8"))?;
            if last.is_some_and(|prev| prev >= name) {
                return Err(WireError::format("claim names not in canonical order"));
            }
            let value = r.take_var("claim value")?;
            claims.insert(name.to_owned(), value.to_vec());
            last = Some(name);
        }
        r.finish("metrics")?;
        Ok(Metrics { claims })
    }
}

impl<K: Into<String>, V: Into<Vec<u8>>> FromIterator<(K, V)> for Metrics {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        Metrics {
            claims: iter
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }
}
