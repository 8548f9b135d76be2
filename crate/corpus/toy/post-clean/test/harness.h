/* Minimal test runner: `prog` runs all tests, `prog ID` runs one,
 * `prog --list` prints the ids. Exit status 0 iff every selected test passed. */
#ifndef HARNESS_H
#define HARNESS_H

#include <stdio.h>
#include <string.h>

typedef struct {
    const char *id;
    void (*fn)(void);
} TestCase;

static int failures;

#define CHECK(cond)                                                        \
    do {                                                                   \
        if (!(cond)) {                                                     \
            printf("%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
            failures++;                                                    \
        }                                                                  \
    } while (0)

static int run_tests(const TestCase *tests, int n, int argc, char **argv)
{
    int i, ran = 0;
    if (argc > 1 && strcmp(argv[1], "--list") == 0) {
        for (i = 0; i < n; i++)
            printf("%s\n", tests[i].id);
        return 0;
    }
    for (i = 0; i < n; i++) {
        int before = failures;
        if (argc > 1 && strcmp(argv[1], tests[i].id) != 0)
            continue;
        tests[i].fn();
        ran++;
        printf("%s %s\n", failures == before ? "PASS" : "FAIL", tests[i].id);
    }
    if (ran == 0) {
        printf("no test named %s\n", argc > 1 ? argv[1] : "");
        return 2;
    }
    return failures == 0 ? 0 : 1;
}

#endif
