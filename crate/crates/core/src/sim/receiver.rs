use alloc::collections::BTreeSet;
use alloc::vec::Vec;

/// What the server proxy did with an incoming datagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receipt {
    /// Accepted; `n` datagrams (possibly 0) were released to the application.
    Accepted(u64),
    Duplicate,
    /// Arrived after the reorder window had already skipped past it.
    Late,
}

/// Server-side dedup and reorder buffer.
///
/// Datagrams are released to the application in sequence order. When more
/// than `window` datagrams wait behind a gap the gap is skipped.
#[derive(Debug, Clone)]
pub struct Receiver {
    window: usize,
    next: u64,
    buffer: BTreeSet<u64>,
    seen: Vec<bool>,
    app: Vec<bool>,
    last_released: Option<u64>,
    pub released: u64,
    pub duplicates: u64,
    pub late: u64,
    pub skipped: u64,
    /// Application saw a sequence number twice. Must stay 0.
    pub app_duplicates: u64,
    /// Application saw a sequence number out of order. Must stay 0.
    pub order_violations: u64,
}

impl Receiver {
    pub fn new(window: usize) -> Self {
        Receiver {
            window: window.max(1),
            next: 0,
            buffer: BTreeSet::new(),
            seen: Vec::new(),
            app: Vec::new(),
            last_released: None,
            released: 0,
            duplicates: 0,
            late: 0,
            skipped: 0,
            app_duplicates: 0,
            order_violations: 0,
        }
    }

    pub fn receive(&mut self, seq: u64) -> Receipt {
        let i = seq as usize;
        if i >= self.seen.len() {
            self.seen.resize(i + 1, false);
        }
        if self.seen[i] {
            self.duplicates += 1;
            return Receipt::Duplicate;
        }
        self.seen[i] = true;
        if seq < self.next {
            self.late += 1;
            return Receipt::Late;
        }
        self.buffer.insert(seq);
        let before = self.released;
        self.drain();
        if self.buffer.len() > self.window {
            let first = *self.buffer.first().expect("non-empty");
            self.skipped += first - self.next;
            self.next = first;
            self.drain();
        }
        Receipt::Accepted(self.released - before)
    }

    fn drain(&mut self) {
        while self.buffer.first() == Some(&self.next) {
            self.buffer.pop_first();
            self.release(self.next);
            self.next += 1;
        }
    }

    fn release(&mut self, seq: u64) {
        let i = seq as usize;
        if i >= self.app.len() {
            self.app.resize(i + 1, false);
        }
        if self.app[i] {
            self.app_duplicates += 1;
        }
        self.app[i] = true;
        if let Some(last) = self.last_released {
            if seq <= last {
                self.order_violations += 1;
            }
        }
        self.last_released = Some(seq);
        self.released += 1;
    }

    /// Datagrams held behind a gap.
    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reorders_and_dedups() {
        let mut r = Receiver::new(8);
        assert_eq!(r.receive(1), Receipt::Accepted(0));
        assert_eq!(r.receive(2), Receipt::Accepted(0));
        assert_eq!(r.receive(0), Receipt::Accepted(3));
        assert_eq!(r.receive(1), Receipt::Duplicate);
        assert_eq!(r.receive(3), Receipt::Accepted(1));
        assert_eq!((r.released, r.duplicates, r.order_violations), (4, 1, 0));
    }

    #[test]
    fn window_skips_gap() {
        let mut r = Receiver::new(2);
        r.receive(1);
        r.receive(2);
        assert_eq!(r.receive(3), Receipt::Accepted(3));
        assert_eq!(r.skipped, 1);
        assert_eq!(r.receive(0), Receipt::Late);
        assert_eq!(r.order_violations, 0);
        assert_eq!(r.app_duplicates, 0);
    }
}
