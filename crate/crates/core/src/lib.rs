pub mod cli;
pub mod config;
pub mod flagcheck;
pub mod registry;
pub mod sandbox;
pub mod service;
pub mod store;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/manifests.md")]
    mod manifests {}
    #[doc = include_str!("../../../book/src/flagcheck.md")]
    mod flagcheck {}
    #[doc = include_str!("../../../book/src/sandbox.md")]
    mod sandbox {}
    #[doc = include_str!("../../../book/src/solve-log.md")]
    mod solve_log {}
    #[doc = include_str!("../../../book/src/http-api.md")]
    mod http_api {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
