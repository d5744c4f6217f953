package com.fix.model;

public class Cube extends Square {
    public double volume() {
        return area() * size;
    }
}
