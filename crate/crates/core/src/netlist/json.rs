// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{Gate, Netlist, NetlistError};

/// JSON form of a netlist for downstream tooling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetlistDump {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub gates: Vec<Gate>,
}

impl From<&Netlist> for NetlistDump {
    fn from(nl: &Netlist) -> Self {
        NetlistDump {
            inputs: nl.input_names().into_iter().map(String::from).collect(),
            outputs: nl.output_names().into_iter().map(String::from).collect(),
            gates: nl.gates(),
        }
    }
}

impl TryFrom<NetlistDump> for Netlist {
    type Error = NetlistError;

    fn try_from(d: NetlistDump) -> Result<Self, Self::Error> {
        Netlist::new(d.inputs, d.outputs, d.gates)
    }
}
