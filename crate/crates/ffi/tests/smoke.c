#include <stdio.h>
#include <string.h>

#include "ewcheck.h"

int main(void) {
    EwProblem *p = NULL;
    if (ew_problem_from_catalog("dkp", &p) != EW_STATUS_OK) {
        fprintf(stderr, "load: %s\n", ew_last_error());
        return 10;
    }
    EwReport *r = NULL;
    if (ew_check(p, EW_CHECK_EW, NULL, &r) != EW_STATUS_OK) {
        fprintf(stderr, "check: %s\n", ew_last_error());
        return 11;
    }
    int verdict = ew_report_verdict(r);
    char *json = ew_report_json(r);
    int has_schema = strstr(json, "\"schema_version\": 1") != NULL;
    ew_string_free(json);
    ew_report_free(r);
    ew_problem_free(p);

    EwProblem *bad = NULL;
    int status = ew_problem_parse("name: x\nequation:\n    u_tt = +\n", &bad);
    if (status != EW_STATUS_PARSE || bad != NULL || ew_last_error() == NULL) {
        return 12;
    }
    printf("%s %d %d\n", ew_version(), verdict, has_schema);
    return 0;
}
