package com.fix.model;

public class Base implements Shape {
    protected int size;

    public double area() {
        return size;
    }

    public int grow(int by) {
        if (by > 0) {
            size = size + by;
        }
        return size;
    }
}
