use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// Question category. `ProblemReport` is the positive class throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    ProblemReport,
    SupportRequest,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::ProblemReport, Label::SupportRequest];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::ProblemReport => "problem_report",
            Label::SupportRequest => "support_request",
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::ProblemReport
    }

    pub fn from_positive(positive: bool) -> Self {
        if positive {
            Label::ProblemReport
        } else {
            Label::SupportRequest
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "problem_report" => Ok(Label::ProblemReport),
            "support_request" => Ok(Label::SupportRequest),
            other => Err(Error::invalid("label", format!("unknown label `{other}`"))),
        }
    }
}
