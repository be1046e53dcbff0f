// SPDX-License-Identifier: Apache-2.0
use super::WireError;

pub(crate) fn put_var(out: &mut Vec<u8>, field: &[u8]) {
    let len = u16::try_from(field.len()).expect("variable field exceeds 65535 bytes");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(field);
}

/// Cursor over a received plaintext.
pub(crate) struct Reader<'a> {
    rest: &'a [u8],
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { rest: bytes }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], WireError> {
        if self.rest.len() < n {
            return Err(WireError::format(format!(
                "{what}: need {n} bytes, {} left",
                self.rest.len()
            )));
        }
        let (head, tail) = self.rest.split_at(n);
        self.rest = tail;
        Ok(head)
    }

    pub(crate) fn take_array<const N: usize>(&mut self, what: &str) -> Result<[u8; N], WireError> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    pub(crate) fn take_var(&mut self, what: &str) -> Result<&'a [u8], WireError> {
        let len = u16::from_be_bytes(self.take_array::<2>(what)?) as usize;
        self.take(len, what)
    }

    pub(crate) fn finish(self, what: &str) -> Result<(), WireError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(WireError::format(format!(
                "{what}: {} trailing bytes",
                self.rest.len()
            )))
        }
    }
}
