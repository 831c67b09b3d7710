pub mod set_checks;
