// Searches for a weak-monotone DGP whose saturated IV estimand is negative although
// every conditional effect is positive, and writes it as a DGP file.
#include "ivlate/dgp.hpp"
#include "ivlate/error.hpp"
#include "ivlate/population.hpp"
#include "ivlate/verify.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"find a sign-reversal DGP"};
    std::uint64_t seed = 1;
    std::size_t tries = 100000;
    std::string out;
    app.add_option("--seed", seed, "search seed");
    app.add_option("--max-tries", tries, "candidate DGPs to try");
    app.add_option("--out", out, "output DGP file")->required();
    CLI11_PARSE(app, argc, argv);
    try {
        ivlate::DgpSpec dgp = ivlate::find_sign_reversal(seed, tries);
        dgp.name = "sign-reversal";
        ivlate::save_dgp(out, dgp);
        const auto pe = ivlate::population_estimands(dgp);
        std::cout << "beta_iv " << *pe.beta_iv.direct << ", beta_riv " << *pe.beta_riv.direct << ", beta_2sls "
                  << *pe.beta_2sls.direct << ", tau_late " << *pe.tau_late.direct << '\n';
    } catch (const ivlate::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
