//! Config files that regenerate the data behind each figure.

pub struct Preset {
    pub name: &'static str,
    pub command: &'static str,
    pub text: &'static str,
}

pub const PRESETS: [Preset; 4] = [
    Preset {
        name: "fig2",
        command: "survival",
        text: "\
# Quantum survival for periodic traps on a ring of 300 sites.
command = \"survival\"
n = 300
arrangement = \"periodic\"
m = [10, 75]
gamma = 0.01
model = \"both\"
",
    },
    Preset {
        name: "fig3",
        command: "ensemble",
        text: "\
# Random traps: averaged quantum and classical survival.
command = \"ensemble\"
n = [51, 101]
m = [4, 8]
gamma = 0.1
arrangement = \"random\"
seed = 1
realizations = 120
",
    },
    Preset {
        name: "fig4",
        command: "survival",
        text: "\
# Sequential traps filling half the ring; the first entry is the long-time system.
command = \"survival\"
n = [48, 32, 48, 64, 96]
m = [24, 16, 24, 32, 48]
gamma = [0.001, 0.04, 0.01, 0.004, 0.004]
arrangement = \"sequential\"
model = \"both\"
",
    },
    Preset {
        name: "fig5",
        command: "sweep",
        text: "\
# Exponent of the averaged quantum decay against trap concentration.
command = \"sweep\"
n = [51, 101, 201]
m = [2, 4, 8]
gamma = 0.1
arrangement = \"random\"
seed = 1
realizations = 120
",
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
