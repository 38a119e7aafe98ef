package com.acme.report;

import com.acme.geo.Pen;
import com.acme.geo.Shapes;

public class ReportRenderer {

    private final Shapes shapes;

    public ReportRenderer() {
        this.shapes = Shapes.newInstance();
    }

    public void outline(Pen pen, float width) {
        pen.setLineWidth(width);
        pen.setColor("black");
    }

    public void hairline(Pen pen) {
        pen.setLineWidth(0.5f);
    }

    public Shapes shapes() {
        return shapes;
    }
}
