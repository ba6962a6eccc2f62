pub mod flow;
pub mod gap;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod report;
pub mod wct;
