fn main() {
    std::process::exit(fairmesh::cli::run(std::env::args_os()));
}
