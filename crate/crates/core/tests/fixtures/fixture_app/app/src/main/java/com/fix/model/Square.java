package com.fix.model;

public class Square extends Base {
    public double area() {
        return size * size;
    }
}
