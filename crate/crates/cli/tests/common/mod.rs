#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use swn_core::eventlog::{write_csv, write_xes};
use swn_core::fixtures;
use swn_core::net::pnml::{write_net, write_pnml};
use swn_core::WeightVector;
use tempfile::TempDir;

/// Fixture nets and logs written to a scratch directory.
pub struct Workspace {
    pub dir: TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().expect("temp dir");
        let ws = Workspace { dir };
        ws.put("pc.pnml", &write_pnml(&fixtures::parallel_choice_swn()));
        ws.put("pc_unweighted.pnml", &write_net(fixtures::parallel_choice_net().net(), None));
        ws.put("pc.csv", &write_csv(&fixtures::parallel_choice_log()).unwrap());
        ws.put("pc.xes", &write_xes(&fixtures::parallel_choice_log()));
        ws.put("nl.pnml", &write_net(fixtures::nested_loop_net().net(), Some(&WeightVector::uniform(9))));
        ws.put("nl.xes", &write_xes(&fixtures::nested_loop_log()));
        ws
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn put(&self, name: &str, bytes: &[u8]) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, bytes).expect("write fixture");
        p
    }

    pub fn read(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.path(name)).expect("read output")
    }
}

pub fn swn<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_swn")).args(args).output().expect("run swn")
}

pub fn arg(p: &Path) -> String {
    p.to_str().expect("utf-8 path").to_string()
}

pub fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: stdout {:?} stderr {:?}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}
