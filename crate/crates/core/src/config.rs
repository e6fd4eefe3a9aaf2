//! Simulation parameters and their flat `key = value` file form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::LINE_SIZE;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Writes counted between samples; the sampled write is the one after.
    pub sample_interval_n: u64,
    /// Samples a frame collects before its page is remapped.
    pub remap_threshold_t: u64,
    /// Bytes the stack moves per relocation.
    pub stack_step: u64,
    pub enable_coarse: bool,
    pub enable_fine: bool,
    /// Frames in the remapping pool; 0 uses exactly the layout's pages.
    pub pool_pages: u64,
    /// Valid stack size assumed when the trace carries no sp updates.
    pub fixed_valid_stack: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sample_interval_n: 5000,
            remap_threshold_t: 4,
            stack_step: 64,
            enable_coarse: true,
            enable_fine: false,
            pool_pages: 0,
            fixed_valid_stack: 4096,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Identity pipeline: no leveling at all.
    pub fn baseline(&self) -> Self {
        SimConfig { enable_coarse: false, enable_fine: false, ..self.clone() }
    }

    pub fn is_leveling(&self) -> bool {
        self.enable_coarse || self.enable_fine
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_interval_n == 0 {
            return Err(Error::Config("sample_interval_n must be at least 1".into()));
        }
        if self.remap_threshold_t == 0 {
            return Err(Error::Config("remap_threshold_t must be at least 1".into()));
        }
        if self.stack_step == 0 || !self.stack_step.is_multiple_of(LINE_SIZE) {
            return Err(Error::Config(format!("stack_step must be a positive multiple of {LINE_SIZE}")));
        }
        if !self.fixed_valid_stack.is_multiple_of(8) {
            return Err(Error::Config("fixed_valid_stack must be 8-byte aligned".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || value.parse::<u64>().map_err(|e| Error::Config(format!("{key}: {e}")));
        let flag = || match value {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
        };
        match key {
            "sample_interval_n" => self.sample_interval_n = num()?,
            "remap_threshold_t" => self.remap_threshold_t = num()?,
            "stack_step" => self.stack_step = num()?,
            "enable_coarse" => self.enable_coarse = flag()?,
            "enable_fine" => self.enable_fine = flag()?,
            "pool_pages" => self.pool_pages = num()?,
            "fixed_valid_stack" => self.fixed_valid_stack = num()?,
            "seed" => self.seed = num()?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. Unknown keys are errors
    /// unless `extra` accepts them.
    pub fn parse_kv_with(text: &str, mut extra: impl FnMut(&str, &str) -> bool) -> Result<Self> {
        let mut cfg = SimConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if extra(k, v) {
                continue;
            }
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse_kv(text: &str) -> Result<Self> {
        Self::parse_kv_with(text, |_, _| false)
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "sample_interval_n = {}", self.sample_interval_n);
        let _ = writeln!(out, "remap_threshold_t = {}", self.remap_threshold_t);
        let _ = writeln!(out, "stack_step = {}", self.stack_step);
        let _ = writeln!(out, "enable_coarse = {}", self.enable_coarse);
        let _ = writeln!(out, "enable_fine = {}", self.enable_fine);
        let _ = writeln!(out, "pool_pages = {}", self.pool_pages);
        let _ = writeln!(out, "fixed_valid_stack = {}", self.fixed_valid_stack);
        let _ = writeln!(out, "seed = {}", self.seed);
        out
    }
}
