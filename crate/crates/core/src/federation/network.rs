use super::RoundMessage;
use crate::cost::wire;
use crate::Result;

/// Byte totals for a batch of transfers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Traffic {
    pub messages: u64,
    pub header_bytes: u64,
    pub payload_bytes: u64,
}

impl Traffic {
    pub fn total_bytes(&self) -> u64 {
        self.header_bytes + self.payload_bytes
    }
}

impl std::ops::AddAssign for Traffic {
    fn add_assign(&mut self, rhs: Self) {
        self.messages += rhs.messages;
        self.header_bytes += rhs.header_bytes;
        self.payload_bytes += rhs.payload_bytes;
    }
}

/// In-process link: every message is encoded, metered and decoded, so the
/// receiver sees exactly what the wire format can carry.
#[derive(Debug, Clone, Default)]
pub struct Network {
    traffic: Traffic,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    /// One point-to-point transfer.
    pub fn send(&mut self, msg: &RoundMessage) -> Result<RoundMessage> {
        let (bytes, size) = wire::encode(msg)?;
        self.traffic.messages += 1;
        self.traffic.header_bytes += size.header as u64;
        self.traffic.payload_bytes += size.payload as u64;
        wire::decode(&bytes)
    }

    /// Client → server → client forwarding: two metered hops.
    pub fn relay(&mut self, msg: &RoundMessage) -> Result<RoundMessage> {
        let at_server = self.send(msg)?;
        self.send(&at_server)
    }

    pub fn traffic(&self) -> Traffic {
        self.traffic
    }

    pub fn take_traffic(&mut self) -> Traffic {
        std::mem::take(&mut self.traffic)
    }
}
