// SPDX-License-Identifier: Apache-2.0

//! Expected ISCAS85 files and their SHA-256 digests.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const EXPECTED: [(&str, &str); 11] = [
    (
        "c17.bench",
        "87b1d217f44f6381cb40460f9e11a8440efca3bc881ef648a4b0c44dad776ee8",
    ),
    (
        "c432.bench",
        "cb3e8c8ed3a9f149c58a3fe3320e0fc119e3b259ba1e392f6b13e377e8a22aa4",
    ),
    (
        "c499.bench",
        "3f1e818d79e53e47b07ce288bd38a17c3b40916f798dad2aa2c77387d4433d13",
    ),
    (
        "c880.bench",
        "39a25eb086f71b61d2fea34e82ad78873c5926b98fc4622fcab14668bd45d704",
    ),
    (
        "c1355.bench",
        "d64239e656fd9383f5392306b19c874f5647a2ec579df021cf0b0886228a13f4",
    ),
    (
        "c1908.bench",
        "b18c227a9ccf0625abf90d7cc5885e70bd930134f6d77198dea510f39c35389b",
    ),
    (
        "c2670.bench",
        "5a24f5135ee00aff5938160275f1c8e86afb4c478e75c3f5304dcd6136ab73ec",
    ),
    (
        "c3540.bench",
        "947aaccd41f5ea1d73c296d590a7cb3978fcd8ba1478213af442e0e7902b6607",
    ),
    (
        "c5315.bench",
        "238afb9a9784850252ecc5f5adf1e41a8cd8c59e1760f419084df186fefdecae",
    ),
    (
        "c6288.bench",
        "b600e142de433932569a3ce93ec61bf02f78e1226d558338b79ee702478f2116",
    ),
    (
        "c7552.bench",
        "df631deee24ac786707822d1ccdf59dc9b799f7dfde0ffb24b796a75ddcd1005",
    ),
];

/// The seven circuits used by the default sweep.
pub const SWEEP_SET: [&str; 7] = ["c432", "c499", "c880", "c1908", "c2670", "c5315", "c7552"];

#[derive(Debug, Serialize)]
pub struct FileStatus {
    pub file: &'static str,
    pub expected_sha256: &'static str,
    pub status: &'static str,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn check_dir(dir: &Path) -> Vec<FileStatus> {
    EXPECTED
        .iter()
        .map(|&(file, expected_sha256)| {
            let status = match fs::read(dir.join(file)) {
                Err(_) => "missing",
                Ok(b) if sha256_hex(&b) == expected_sha256 => "ok",
                Ok(_) => "checksum-mismatch",
            };
            FileStatus {
                file,
                expected_sha256,
                status,
            }
        })
        .collect()
}
