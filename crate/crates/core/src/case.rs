//! Versioned JSON case files holding a complete constructed solution.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::solution::Solution;

pub const SCHEMA: &str = "simflow.case/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub schema: String,
    pub solution: Solution,
}

impl Case {
    pub fn new(solution: Solution) -> Case {
        Case { schema: SCHEMA.to_string(), solution }
    }

    pub fn to_json(&self) -> Result<String> {
        let s = serde_json::to_string(self).map_err(|e| SimError::Case(e.to_string()))?;
        // serde_json writes non-finite floats as null, which would not read back
        if s.contains("null") {
            return Err(SimError::Case("solution contains non-finite values".into()));
        }
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Case> {
        let v: serde_json::Value = serde_json::from_str(s).map_err(|e| SimError::Case(e.to_string()))?;
        match v.get("schema").and_then(|x| x.as_str()) {
            Some(SCHEMA) => {}
            Some(other) => return Err(SimError::Case(format!("unsupported schema {other:?}, expected {SCHEMA:?}"))),
            None => return Err(SimError::Case("missing schema field".into())),
        }
        let case: Case = serde_json::from_value(v).map_err(|e| SimError::Case(e.to_string()))?;
        case.solution.cfg.validate()?;
        case.solution.controls.validate()?;
        Ok(case)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| SimError::Case(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Case> {
        let s = std::fs::read_to_string(path).map_err(|e| SimError::Case(format!("{}: {e}", path.display())))?;
        Case::from_json(&s)
    }
}
