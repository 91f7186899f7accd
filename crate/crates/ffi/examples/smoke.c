#include <stdio.h>
#include <stdlib.h>

#include "mm_galerkin.h"

static int check(MmgStatus s, const char *what) {
    if (s != MMG_STATUS_OK) {
        const char *msg = mmg_last_error_message();
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, msg ? msg : "");
        return 1;
    }
    return 0;
}

int main(void) {
    MmgProblem *p = NULL;
    MmgSolution *sol = NULL;
    MmgRom *rom = NULL;
    double lo[2] = {-1.0, -1.0}, hi[2] = {1.0, 1.0};
    double sub_lo[2] = {-0.7, -0.7}, sub_hi[2] = {0.7, 0.7};
    int rc = 1;

    if (check(mmg_problem_builtin("test1", NULL, NULL, 0, &p), "problem")) goto done;
    MmgSolverOptions opts = mmg_solver_options_default();
    if (check(mmg_solve(p, lo, hi, 2, 4, 0, &opts, &sol), "solve")) goto done;

    size_t n = mmg_solution_coefficient_count(sol);
    double *c = malloc(n * sizeof(double));
    if (check(mmg_solution_coefficients(sol, c, n), "coefficients")) { free(c); goto done; }
    free(c);

    double res = 0.0;
    if (check(mmg_solution_residual_norm(sol, sub_lo, sub_hi, 2, 20, &res), "residual")) goto done;
    if (check(mmg_rom_build(sol, 0.5, &rom), "rom")) goto done;

    printf("version %s iterations %zu residual %.3e rom_dim %zu max_re %.3f\n",
           mmg_version(), mmg_solution_iterations(sol), res, mmg_rom_dim(rom),
           mmg_rom_max_real_part(rom));
    rc = res < 1e-10 ? 0 : 1;

done:
    mmg_rom_free(rom);
    mmg_solution_free(sol);
    mmg_problem_free(p);
    return rc;
}
