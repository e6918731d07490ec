fn main() {
    std::process::exit(merge_game_cli::main_with(std::env::args_os()));
}
