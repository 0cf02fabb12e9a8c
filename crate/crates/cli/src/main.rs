fn main() {
    std::process::exit(budgetk_cli::run());
}
