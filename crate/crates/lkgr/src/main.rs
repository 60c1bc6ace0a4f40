fn main() {
    std::process::exit(lkgr::cli::run());
}
