use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

/// One validation check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: u32,
    pub name: String,
    pub status: Status,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub detail: String,
    pub elapsed_seconds: f64,
    pub budget_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub suite: String,
    pub seed: u64,
    pub status: Status,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn new(suite: &str, seed: u64, checks: Vec<Check>) -> Self {
        let status = overall(&checks);
        Self {
            suite: suite.to_string(),
            seed,
            status,
            checks,
        }
    }
}

/// Fail iff some check that is not inconclusive fails.
pub fn overall(checks: &[Check]) -> Status {
    if checks.iter().any(|c| c.status == Status::Fail) {
        Status::Fail
    } else {
        Status::Pass
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(status: Status) -> Check {
        Check {
            id: 1,
            name: "x".into(),
            status,
            measured: 0.0,
            target: 0.0,
            tolerance: 0.0,
            detail: String::new(),
            elapsed_seconds: 0.0,
            budget_seconds: 1.0,
        }
    }

    #[test]
    fn inconclusive_does_not_fail() {
        assert_eq!(
            overall(&[check(Status::Pass), check(Status::Inconclusive)]),
            Status::Pass
        );
        assert_eq!(
            overall(&[check(Status::Fail), check(Status::Inconclusive)]),
            Status::Fail
        );
        assert_eq!(overall(&[]), Status::Pass);
    }
}
