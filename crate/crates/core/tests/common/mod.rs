//! Test-side oracles and fixture builders, independent of the library's own
//! encoders.
#![allow(dead_code)]

use std::net::SocketAddrV4;
use std::time::Duration;

use pcap_file::pcap::{PcapPacket, PcapWriter};

pub const RW_SECRET: &str = "ACHY3VFJZ3RJ3DE2CHPUGE6W7EZSRA3OR";

/// The verbatim lines of the published sync.log excerpt, with folder paths
/// restored from their typeset form.
pub const LOG_LINES: [&str; 9] = [
    "[2013-12-01 12:41:33] Loading config file version 1.1.82",
    r"[2013-12-01 12:41:33] Loaded folder \\?\~User\BTSync",
    r"[2013-12-01 12:41:33] Loaded folder \\?\~User\Desktop\sharefolder",
    r"[2013-12-01 12:41:33] Loaded folder \\?\~User\Desktop\sf2",
    "[2013-12-01 12:43:44] Got ping (broadcast: 1) from peer 192.168.0.11:27900 (00DC0AC2F0F91921AE29FC5E8F2273828BBAC747) for share 35F762999B1275C0F894F3D5FBAC7059F76783ED",
    r"[2013-12-01 12:43:44] Found peer for folder \\?\~User\Desktop\sharefolder 00DC0AC2F0F91921AE29FC5E8F2273828BBAC747 192.168.0.11:27900 direct:1",
    "[2013-12-01 12:43:45] Sending broadcast ping for share 55045F90CA4C1A42DDB78DCD132F3ACC33E946EC",
    "[2013-12-01 12:43:45] Requesting peers from server",
    "[2013-12-01 12:43:45] Sending broadcast ping for share 35F762999B1275C0F894F3D5FBAC7059F76783ED",
];

// ---------------------------------------------------------------------------
// SHA-1 (FIPS 180-4), written out longhand as an oracle.
// ---------------------------------------------------------------------------

pub fn sha1_oracle(msg: &[u8]) -> [u8; 20] {
    let mut h: [u32; 5] = [0x6745_2301, 0xEFCD_AB89, 0x98BA_DCFE, 0x1032_5476, 0xC3D2_E1F0];
    let mut data = msg.to_vec();
    let bit_len = (msg.len() as u64).wrapping_mul(8);
    data.push(0x80);
    while data.len() % 64 != 56 {
        data.push(0);
    }
    data.extend_from_slice(&bit_len.to_be_bytes());
    for chunk in data.chunks(64) {
        let mut w = [0u32; 80];
        for i in 0..16 {
            w[i] = u32::from_be_bytes([chunk[4 * i], chunk[4 * i + 1], chunk[4 * i + 2], chunk[4 * i + 3]]);
        }
        for i in 16..80 {
            w[i] = (w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16]).rotate_left(1);
        }
        let [mut a, mut b, mut c, mut d, mut e] = h;
        for (i, wi) in w.iter().enumerate() {
            let (f, k) = match i {
                0..=19 => ((b & c) | (!b & d), 0x5A82_7999),
                20..=39 => (b ^ c ^ d, 0x6ED9_EBA1),
                40..=59 => ((b & c) | (b & d) | (c & d), 0x8F1B_BCDC),
                _ => (b ^ c ^ d, 0xCA62_C1D6),
            };
            let t = a.rotate_left(5).wrapping_add(f).wrapping_add(e).wrapping_add(k).wrapping_add(*wi);
            e = d;
            d = c;
            c = b.rotate_left(30);
            b = a;
            a = t;
        }
        for (x, y) in h.iter_mut().zip([a, b, c, d, e]) {
            *x = x.wrapping_add(y);
        }
    }
    let mut out = [0u8; 20];
    for (i, x) in h.iter().enumerate() {
        out[4 * i..4 * i + 4].copy_from_slice(&x.to_be_bytes());
    }
    out
}

// ---------------------------------------------------------------------------
// Minimal bencode writer: keys must already be given in sorted order.
// ---------------------------------------------------------------------------

pub fn b_str(b: &[u8]) -> Vec<u8> {
    let mut out = format!("{}:", b.len()).into_bytes();
    out.extend_from_slice(b);
    out
}

pub fn b_int(i: i64) -> Vec<u8> {
    format!("i{i}e").into_bytes()
}

pub fn b_list(items: &[Vec<u8>]) -> Vec<u8> {
    let mut out = vec![b'l'];
    for i in items {
        out.extend_from_slice(i);
    }
    out.push(b'e');
    out
}

/// Values are pre-encoded; keys are written as byte strings in the order
/// given.
pub fn b_dict(pairs: &[(&str, Vec<u8>)]) -> Vec<u8> {
    let mut keys: Vec<&str> = pairs.iter().map(|(k, _)| *k).collect();
    keys.sort_unstable();
    assert_eq!(keys, pairs.iter().map(|(k, _)| *k).collect::<Vec<_>>(), "fixture keys must be sorted");
    let mut out = vec![b'd'];
    for (k, v) in pairs {
        out.extend(b_str(k.as_bytes()));
        out.extend_from_slice(v);
    }
    out.push(b'e');
    out
}

pub fn la(ep: SocketAddrV4) -> Vec<u8> {
    let mut v = ep.ip().octets().to_vec();
    v.extend_from_slice(&ep.port().to_be_bytes());
    v
}

pub fn lan_ping_payload(ep: SocketAddrV4, share: &[u8; 20]) -> Vec<u8> {
    let mut p = b"BSYNC\0".to_vec();
    p.extend(b_dict(&[
        ("la", b_str(&la(ep))),
        ("m", b_str(b"ping")),
        ("share", b_str(share)),
    ]));
    p
}

pub fn get_peers_payload(ep: SocketAddrV4, peer: &[u8; 20], share: &[u8; 20]) -> Vec<u8> {
    b_dict(&[
        ("la", b_str(&la(ep))),
        ("m", b_str(b"get_peers")),
        ("peer", b_str(peer)),
        ("share", b_str(share)),
    ])
}

pub fn peers_response_payload(entries: &[(SocketAddrV4, [u8; 20], [u8; 20])]) -> Vec<u8> {
    let list: Vec<Vec<u8>> = entries
        .iter()
        .map(|(ep, peer, share)| {
            b_dict(&[("la", b_str(&la(*ep))), ("peer", b_str(peer)), ("share", b_str(share))])
        })
        .collect();
    b_dict(&[("m", b_str(b"peers")), ("peers", b_list(&list))])
}

pub fn relay_ping_payload(peer: &[u8; 20], share32: &[u8; 32]) -> Vec<u8> {
    b_dict(&[("m", b_str(b"ping")), ("peer", b_str(peer)), ("share", b_str(share32))])
}

pub fn relay_nonce_payload(nonce: &[u8; 16]) -> Vec<u8> {
    b_dict(&[("nonce", b_str(nonce))])
}

pub fn relay_key_payload(key: &[u8; 20]) -> Vec<u8> {
    b_dict(&[("key", b_str(key))])
}

// ---------------------------------------------------------------------------
// Capture writer
// ---------------------------------------------------------------------------

pub struct Datagram {
    pub micros: u64,
    pub src: SocketAddrV4,
    pub dst: SocketAddrV4,
    pub payload: Vec<u8>,
}

pub fn ethernet_udp_frame(src: SocketAddrV4, dst: SocketAddrV4, payload: &[u8]) -> Vec<u8> {
    let mut f = vec![0x02, 0, 0, 0, 0, 0x02, 0x02, 0, 0, 0, 0, 0x01, 0x08, 0x00];
    let total = 20 + 8 + payload.len();
    f.extend_from_slice(&[0x45, 0]);
    f.extend_from_slice(&(total as u16).to_be_bytes());
    f.extend_from_slice(&[0, 0, 0x40, 0, 64, 17, 0, 0]);
    f.extend_from_slice(&src.ip().octets());
    f.extend_from_slice(&dst.ip().octets());
    f.extend_from_slice(&src.port().to_be_bytes());
    f.extend_from_slice(&dst.port().to_be_bytes());
    f.extend_from_slice(&((8 + payload.len()) as u16).to_be_bytes());
    f.extend_from_slice(&[0, 0]);
    f.extend_from_slice(payload);
    f
}

pub fn write_capture(datagrams: &[Datagram]) -> Vec<u8> {
    let mut w = PcapWriter::new(Vec::new()).expect("pcap header");
    for d in datagrams {
        let frame = ethernet_udp_frame(d.src, d.dst, &d.payload);
        w.write_packet(&PcapPacket::new(Duration::from_micros(d.micros), frame.len() as u32, &frame))
            .expect("pcap record");
    }
    w.into_writer()
}

pub fn ep(s: &str) -> SocketAddrV4 {
    s.parse().unwrap()
}

pub fn unhex20(s: &str) -> [u8; 20] {
    hex::decode(s).unwrap().try_into().unwrap()
}

/// One line of acceptance output, so each criterion is visible in the log.
pub fn report(criterion: &str, ok: bool, detail: &str) {
    println!("[{}] {criterion}: {detail}", if ok { "PASS" } else { "FAIL" });
}
