#include <math.h>
#include <stdio.h>

#include "promptseg.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (line %d)\n", #cond, __LINE__); return 1; } } while (0)

int main(void) {
    PsBox a = {0.0, 0.0, 2.0, 2.0};
    PsBox b = {1.0, 0.0, 3.0, 2.0};
    double v = 0.0;
    CHECK(ps_box_iou(&a, &b, &v) == PS_STATUS_OK);
    CHECK(fabs(v - 1.0 / 3.0) < 1e-12);

    PsBox bad = {2.0, 0.0, 1.0, 1.0};
    CHECK(ps_box_iou(&bad, &b, &v) == PS_STATUS_INVALID_ARGUMENT);
    CHECK(ps_last_error_message() != NULL);

    PsDetection dets[3] = {
        {{0.0, 0.0, 10.0, 10.0}, 1, 0.5},
        {{1.0, 1.0, 10.0, 10.0}, 1, 0.9},
        {{40.0, 40.0, 50.0, 50.0}, 1, 0.7},
    };
    size_t kept[3];
    size_t n = 0;
    CHECK(ps_nms(dets, 3, 0.1, kept, &n) == PS_STATUS_OK);
    CHECK(n == 2 && kept[0] == 1 && kept[1] == 2);

    double scores[3] = {0.0, 1.0, 1.0};
    double probs[3];
    CHECK(ps_softmax(scores, 3, probs) == PS_STATUS_OK);
    CHECK(fabs(probs[0] + probs[1] + probs[2] - 1.0) < 1e-12);

    PsConfusion *cm = NULL;
    uint8_t gt[4] = {1, 1, 0, 0};
    uint8_t pred[4] = {1, 0, 0, 0};
    PsReport r;
    CHECK(ps_confusion_new(1, &cm) == PS_STATUS_OK);
    CHECK(ps_confusion_accumulate(cm, pred, gt, 2, 2) == PS_STATUS_OK);
    CHECK(ps_confusion_report(cm, &r) == PS_STATUS_OK);
    CHECK(r.miou == 0.5 && r.pixel_accuracy == 0.75);
    ps_confusion_free(cm);

    printf("ok %s\n", ps_version());
    return 0;
}
