#ifndef SHAPE_H
#define SHAPE_H

int area(int width, int height);

#endif
