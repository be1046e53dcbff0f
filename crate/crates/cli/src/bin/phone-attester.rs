// SPDX-License-Identifier: Apache-2.0
use std::process::ExitCode;

fn main() -> ExitCode {
    apcr_cli::cli::main_for(apcr_cli::Role::Attester)
}
