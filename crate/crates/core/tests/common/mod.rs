//! Shared fixtures and oracles for the integration tests.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use ctf_vault::flagcheck::digest_flag;
use ctf_vault::registry::{parse_manifest, Category, Registry, RegistryEntry, MANIFEST_FILE};
use ctf_vault::store::SolveRecord;

/// Per-category (available, solves), in table order. Totals 700 / 7395.
pub const COVERAGE_TABLE: [(Category, u64, u64); 11] = [
    (Category::Cryptography, 261, 5204),
    (Category::BinaryExploitation, 168, 504),
    (Category::ReverseEngineering, 125, 856),
    (Category::WebExploitation, 26, 220),
    (Category::Forensics, 43, 160),
    (Category::OSINT, 17, 71),
    (Category::Blockchain, 2, 2),
    (Category::RadioFrequency, 2, 8),
    (Category::SocialEngineering, 1, 2),
    (Category::Steganography, 1, 4),
    (Category::Misc, 54, 364),
];

pub const COVERAGE_TOTAL_AVAILABLE: u64 = 700;
pub const COVERAGE_TOTAL_SOLVES: u64 = 7395;

// ---------------------------------------------------------------------------
// Independent SHA-256 (FIPS 180-4), used only to cross-check the library.
// ---------------------------------------------------------------------------

const K: [u32; 64] = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
];

pub fn oracle_sha256_hex(data: &[u8]) -> String {
    let mut h: [u32; 8] = [
        0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
    ];
    let mut msg = data.to_vec();
    let bit_len = (data.len() as u64).wrapping_mul(8);
    msg.push(0x80);
    while msg.len() % 64 != 56 {
        msg.push(0);
    }
    msg.extend_from_slice(&bit_len.to_be_bytes());

    for block in msg.chunks(64) {
        let mut w = [0u32; 64];
        for (i, word) in block.chunks(4).enumerate() {
            w[i] = u32::from_be_bytes([word[0], word[1], word[2], word[3]]);
        }
        for i in 16..64 {
            let s0 = w[i - 15].rotate_right(7) ^ w[i - 15].rotate_right(18) ^ (w[i - 15] >> 3);
            let s1 = w[i - 2].rotate_right(17) ^ w[i - 2].rotate_right(19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16].wrapping_add(s0).wrapping_add(w[i - 7]).wrapping_add(s1);
        }
        let [mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut hh] = h;
        for i in 0..64 {
            let s1 = e.rotate_right(6) ^ e.rotate_right(11) ^ e.rotate_right(25);
            let ch = (e & f) ^ (!e & g);
            let t1 = hh.wrapping_add(s1).wrapping_add(ch).wrapping_add(K[i]).wrapping_add(w[i]);
            let s0 = a.rotate_right(2) ^ a.rotate_right(13) ^ a.rotate_right(22);
            let maj = (a & b) ^ (a & c) ^ (b & c);
            let t2 = s0.wrapping_add(maj);
            hh = g;
            g = f;
            f = e;
            e = d.wrapping_add(t1);
            d = c;
            c = b;
            b = a;
            a = t1.wrapping_add(t2);
        }
        for (slot, v) in h.iter_mut().zip([a, b, c, d, e, f, g, hh]) {
            *slot = slot.wrapping_add(v);
        }
    }
    h.iter().map(|w| format!("{w:08x}")).collect()
}

// ---------------------------------------------------------------------------
// Archive builders
// ---------------------------------------------------------------------------

/// Writes `<root>/<location>/challenge.manifest` plus `files` (relative path,
/// contents). Returns the challenge directory.
pub fn write_challenge(root: &Path, location: &str, manifest: &str, files: &[(&str, &str)]) -> PathBuf {
    let dir = root.join(location);
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join(MANIFEST_FILE), manifest).unwrap();
    for (rel, contents) in files {
        let path = dir.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, contents).unwrap();
    }
    dir
}

pub const E2E_FLAG: &str = "flag{sm4ll_e_is_n0t_s4fe}";
pub const E2E_PLATFORM_FLAG: &str = "vault{rsa-warmup}";

/// A small archive that passes validation: one hashed-flag crypto service on
/// tcp/1337 plus a plaintext-flag forensics download.
pub fn e2e_archive(root: &Path) {
    write_challenge(
        root,
        "warmupctf-2021/rsa-warmup",
        &format!(
            "id: rsa-warmup\nevent: WarmupCTF\nyear: 2021\ncategory: crypto\npoints: 100\ntitle: RSA Warmup\n\
             description: Tiny exponent, tiny problem.\nartifact: dist/chall.py\nendpoint: tcp/1337\n\
             flag_digest: {}\nplatform_flag: {E2E_PLATFORM_FLAG}\n",
            digest_flag(E2E_FLAG)
        ),
        &[
            ("dist/chall.py", "print(pow(m, 3, n))\n"),
            ("REHOST.md", "Runs the original service under socat.\n"),
        ],
    );
    write_challenge(
        root,
        "warmupctf-2021/pcap-1",
        "id: pcap-1\nevent: WarmupCTF\nyear: 2021\ncategory: forensics\npoints: 50\n\
         description: Find the exfiltrated bytes.\nartifact: dist/capture.pcap\nflag: flag{dns_tunnel}\n",
        &[("dist/capture.pcap", "\u{d4}\u{c3}"), ("REHOST.md", "Download only.\n")],
    );
}

/// Ten challenges covering every endpoint kind, nested artifacts and an
/// upstream recipe. `sep` is the separator used inside artifact paths.
pub fn determinism_corpus(root: &Path, sep: char) {
    let cats = ["crypto", "pwn", "rev", "web", "forensics", "osint", "stego", "rf", "misc", "blockchain"];
    for (i, cat) in cats.iter().enumerate() {
        let id = format!("det-{i}");
        let nested = format!("dist{sep}lib{sep}libc-{i}.so");
        let mut manifest = format!(
            "id: {id}\nevent: DetCTF\nyear: 2022\ncategory: {cat}\npoints: {}\ndescription: challenge {i}\n\
             artifact: dist{sep}chall-{i}\nartifact: {nested}\n",
            100 + i
        );
        match i % 4 {
            0 => manifest.push_str(&format!("endpoint: tcp/{}\n", 9000 + i)),
            1 => manifest.push_str(&format!("endpoint: http/{}\nendpoint: tcp/{}\n", 8000 + i, 7000 + i)),
            2 => manifest.push_str("endpoint: ssh/22\n"),
            _ => {}
        }
        manifest.push_str(&format!("flag: flag{{det_{i}}}\n"));
        let mut files = vec![
            (format!("dist/chall-{i}"), format!("binary {i}")),
            (format!("dist/lib/libc-{i}.so"), "ELF".to_string()),
            ("REHOST.md".to_string(), "notes".to_string()),
        ];
        if i == 7 {
            files.push(("src/Dockerfile".to_string(), "FROM alpine:3.19\r\nCOPY run /run\r\nCMD [\"/run\"]\r\n".to_string()));
        } else if i % 3 == 0 {
            files.push(("src/server.c".to_string(), "int main(){}".to_string()));
        }
        let files: Vec<(&str, &str)> = files.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        write_challenge(root, &format!("detctf-2022/{id}"), &manifest, &files);
    }
}

// ---------------------------------------------------------------------------
// Table-scale fixtures
// ---------------------------------------------------------------------------

/// A registry with the table's per-category challenge counts. Manifests are
/// built in memory; directories need not exist.
pub fn table_registry(root: &Path) -> Registry {
    let mut entries = Vec::new();
    for (cat, available, _) in COVERAGE_TABLE {
        for n in 0..available {
            let id = format!("{}-{n}", cat.as_str());
            let text = format!(
                "id: {id}\nevent: Event{}\nyear: {}\ncategory: {}\npoints: 100\nartifact: dist/file\nflag: flag{{{id}}}\n",
                n % 7,
                2015 + n % 9,
                cat.as_str()
            );
            entries.push(RegistryEntry {
                manifest: parse_manifest(&text).unwrap(),
                dir: root.join(format!("event{}/{id}", n % 7)),
            });
        }
    }
    Registry::from_entries(root, entries).unwrap()
}

/// Distinct (user, challenge) solve records with the table's per-category
/// solve counts. Users cycle so that every pair is unique.
pub fn table_solves() -> Vec<SolveRecord> {
    let mut out = Vec::new();
    let mut ts = 1_600_000_000u64;
    for (cat, available, solves) in COVERAGE_TABLE {
        for k in 0..solves {
            let challenge = format!("{}-{}", cat.as_str(), k % available);
            let user = format!("user{}", k / available);
            ts += 1;
            out.push(SolveRecord::new(user, challenge, ts));
        }
    }
    out
}
