//! Drive the monitor's protocol state machine by hand and print the side
//! effects each input triggers.

use std::net::{IpAddr, Ipv4Addr};

use driver_telemetry::protocol::session::{monitor_handle, Command, Input, SessionState};

fn main() {
    let simulator = IpAddr::V4(Ipv4Addr::new(10, 0, 0, 2));
    let stranger = IpAddr::V4(Ipv4Addr::new(10, 0, 0, 99));
    let trace = [
        Input::Connection(stranger),
        Input::Connection(simulator),
        Input::Command(Command::Pause),
        Input::Command(Command::Resume),
        Input::Command(Command::StopAll),
        Input::Command(Command::Pause),
        Input::TransferComplete,
    ];
    let mut state = SessionState::new(simulator);
    for input in trace {
        let before = state.phase;
        let (next, actions) = monitor_handle(state, input.clone());
        println!("{before:?} --{input:?}--> {:?}  {actions:?}", next.phase);
        state = next;
    }
}
