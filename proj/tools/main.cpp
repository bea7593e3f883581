#include <exception>
#include <iostream>

#include "crseval/cli.hpp"
#include "crseval/errors.hpp"

int main(int argc, char** argv) {
    try {
        return crseval::cli::run(argc, argv);
    } catch (const crseval::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return crseval::cli::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
