#include <stdio.h>
#include <string.h>
#include "dplab.h"

static const char *CONFIG =
    "protocol = \"ising\"\n"
    "seed = 11\n"
    "ensemble_size = 3\n"
    "levels = 3\n"
    "recodings = [\"flip\", \"reflect-0\", \"transpose\"]\n"
    "[ising]\n"
    "p_up = 1.0\n"
    "steps = 4\n"
    "[[policies]]\n"
    "id = \"square\"\n"
    "scheme = \"nearest\"\n"
    "base = [8, 8]\n";

int main(void) {
    DplabConfig *cfg = NULL;
    DplabReport *report = NULL;
    const double *ssi = NULL;
    size_t n = 0;
    char *label = NULL;
    DplabVerdict verdict;

    if (dplab_config_from_toml(CONFIG, &cfg) != DPLAB_STATUS_OK) return 1;
    if (dplab_run(cfg, &report) != DPLAB_STATUS_OK) return 2;
    if (dplab_report_ssi(report, &ssi, &n) != DPLAB_STATUS_OK || n != 2 || ssi[0] != 0.0) return 3;
    if (dplab_report_verdict(report, &verdict) != DPLAB_STATUS_OK || verdict != DPLAB_VERDICT_DECAYING) return 4;
    if (dplab_classify("forall x:R exists n:N [phi]", DPLAB_CLASSIFIER_MODE_STRICT, true, &label) != DPLAB_STATUS_OK) return 5;
    if (strcmp(label, "Pi^1_1") != 0) return 6;
    dplab_string_free(label);
    if (dplab_config_from_toml("protocol = 1", &cfg) != DPLAB_STATUS_INVALID_ARGUMENT || dplab_last_error() == NULL) return 7;
    dplab_report_free(report);
    printf("ok\n");
    return 0;
}
