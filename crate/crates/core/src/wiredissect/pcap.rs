//! Classic libpcap reader yielding IPv4/UDP datagrams.

use std::net::{Ipv4Addr, SocketAddrV4};

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::WireError;

const MAGIC: u32 = 0xA1B2_C3D4;
const LINKTYPE_ETHERNET: u32 = 1;
const GLOBAL_HEADER: usize = 24;
const RECORD_HEADER: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PacketContext {
    /// 0-based record number within the capture.
    pub index: usize,
    pub timestamp: DateTime<Utc>,
    pub src: SocketAddrV4,
    pub dst: SocketAddrV4,
    #[serde(skip)]
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Capture {
    pub packets: Vec<PacketContext>,
    /// Records that were not IPv4/UDP (or were IP fragments).
    pub skipped: usize,
}

#[derive(Clone, Copy)]
struct Endian(bool);

impl Endian {
    fn u16(self, b: &[u8]) -> u16 {
        let a = [b[0], b[1]];
        if self.0 { u16::from_be_bytes(a) } else { u16::from_le_bytes(a) }
    }
    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        if self.0 { u32::from_be_bytes(a) } else { u32::from_le_bytes(a) }
    }
}

pub fn read_pcap(input: &[u8]) -> Result<Capture, WireError> {
    if input.len() < GLOBAL_HEADER {
        return Err(WireError::NotPcap);
    }
    let magic = [input[0], input[1], input[2], input[3]];
    let endian = if u32::from_le_bytes(magic) == MAGIC {
        Endian(false)
    } else if u32::from_be_bytes(magic) == MAGIC {
        Endian(true)
    } else {
        return Err(WireError::NotPcap);
    };
    let _version = (endian.u16(&input[4..]), endian.u16(&input[6..]));
    let linktype = endian.u32(&input[20..]);
    if linktype != LINKTYPE_ETHERNET {
        return Err(WireError::UnsupportedLinkType(linktype));
    }

    let mut capture = Capture::default();
    let mut pos = GLOBAL_HEADER;
    let mut index = 0;
    while pos < input.len() {
        let header = input
            .get(pos..pos + RECORD_HEADER)
            .ok_or(WireError::TruncatedPacket(index))?;
        let secs = endian.u32(&header[0..]);
        let micros = endian.u32(&header[4..]);
        let incl = endian.u32(&header[8..]) as usize;
        pos += RECORD_HEADER;
        let frame = input
            .get(pos..pos.saturating_add(incl))
            .ok_or(WireError::TruncatedPacket(index))?;
        pos += incl;
        let timestamp = DateTime::from_timestamp(i64::from(secs), micros.min(999_999) * 1000)
            .unwrap_or_default();
        match udp_from_ethernet(frame) {
            Some((src, dst, payload)) => capture.packets.push(PacketContext {
                index,
                timestamp,
                src,
                dst,
                payload: payload.to_vec(),
            }),
            None => capture.skipped += 1,
        }
        index += 1;
    }
    Ok(capture)
}

fn udp_from_ethernet(frame: &[u8]) -> Option<(SocketAddrV4, SocketAddrV4, &[u8])> {
    let mut off = 12;
    let mut ethertype = u16::from_be_bytes([*frame.get(off)?, *frame.get(off + 1)?]);
    off += 2;
    while ethertype == 0x8100 || ethertype == 0x88A8 {
        ethertype = u16::from_be_bytes([*frame.get(off + 2)?, *frame.get(off + 3)?]);
        off += 4;
    }
    if ethertype != 0x0800 {
        return None;
    }
    udp_from_ipv4(frame.get(off..)?)
}

fn udp_from_ipv4(ip: &[u8]) -> Option<(SocketAddrV4, SocketAddrV4, &[u8])> {
    let vihl = *ip.first()?;
    if vihl >> 4 != 4 {
        return None;
    }
    let ihl = usize::from(vihl & 0x0f) * 4;
    if ihl < 20 || ip.len() < ihl {
        return None;
    }
    let total = usize::from(u16::from_be_bytes([ip[2], ip[3]]));
    let flags_frag = u16::from_be_bytes([ip[6], ip[7]]);
    // more-fragments set or non-zero offset
    if flags_frag & 0x3fff != 0 || ip[9] != 17 {
        return None;
    }
    let src_ip = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst_ip = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
    let end = if total >= ihl { total.min(ip.len()) } else { ip.len() };
    let udp = ip.get(ihl..end)?;
    if udp.len() < 8 {
        return None;
    }
    let sport = u16::from_be_bytes([udp[0], udp[1]]);
    let dport = u16::from_be_bytes([udp[2], udp[3]]);
    let ulen = usize::from(u16::from_be_bytes([udp[4], udp[5]]));
    let body_end = if ulen >= 8 { ulen.min(udp.len()) } else { udp.len() };
    Some((
        SocketAddrV4::new(src_ip, sport),
        SocketAddrV4::new(dst_ip, dport),
        &udp[8..body_end],
    ))
}
