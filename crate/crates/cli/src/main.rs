fn main() {
    std::process::exit(lowrank_dag_cli::run(std::env::args_os()));
}
