package com.premiumminds.billy.gin.services.impl.pdf;

import java.io.File;
import java.io.IOException;
import java.io.InputStream;
import java.io.OutputStream;
import java.util.HashMap;
import java.util.Map;

import javax.xml.transform.Result;
import javax.xml.transform.Source;
import javax.xml.transform.Transformer;
import javax.xml.transform.TransformerFactory;
import javax.xml.transform.sax.SAXResult;
import javax.xml.transform.stream.StreamSource;

import org.apache.fop.apps.FOUserAgent;
import org.apache.fop.apps.Fop;
import org.apache.fop.apps.FopFactory;

/**
 * Renders invoice templates to PDF through XSL-FO.
 */
public class FOPPDFTransformer {

    private static final String MIME_PDF = "application/pdf";
    private static final String PRODUCER = "billy";

    private final String templatePath;
    private final Map<String, String> parameters;

    public FOPPDFTransformer(String templatePath) {
        this.templatePath = templatePath;
        this.parameters = new HashMap<>();
    }

    public void setParameter(String name, String value) {
        this.parameters.put(name, value);
    }

    public String getParameter(String name) {
        return this.parameters.get(name);
    }

    public String getTemplatePath() {
        return this.templatePath;
    }

    public boolean hasParameter0() {
        return this.parameters.containsKey("p0");
    }

    public boolean hasParameter1() {
        return this.parameters.containsKey("p1");
    }

    public boolean hasParameter2() {
        return this.parameters.containsKey("p2");
    }

    public boolean hasParameter3() {
        return this.parameters.containsKey("p3");
    }

    public boolean hasParameter4() {
        return this.parameters.containsKey("p4");
    }

    public boolean hasParameter5() {
        return this.parameters.containsKey("p5");
    }

    public boolean hasParameter6() {
        return this.parameters.containsKey("p6");
    }

    public boolean hasParameter7() {
        return this.parameters.containsKey("p7");
    }

    public boolean hasParameter8() {
        return this.parameters.containsKey("p8");
    }

    public boolean hasParameter9() {
        return this.parameters.containsKey("p9");
    }

    public boolean hasParameter10() {
        return this.parameters.containsKey("p10");
    }

    public boolean hasParameter11() {
        return this.parameters.containsKey("p11");
    }

    public boolean hasParameter12() {
        return this.parameters.containsKey("p12");
    }

    public int parameterCount() {
        return this.parameters.size();
    }

    protected void transformToStream(InputStream templateStream, Source xmlSource, OutputStream outStream)
            throws IOException {
        try {
            this.render(templateStream, xmlSource, outStream);
        } catch (Exception e) {
            throw new IOException(e);
        }
    }

    private void render(InputStream templateStream, Source xmlSource, OutputStream outStream) throws Exception {
        // create an instance of fop factory
        FopFactory fopFactory = FopFactory.newInstance(new File(".").toURI());
        // a user agent is needed for transformation
        FOUserAgent foUserAgent = fopFactory.newFOUserAgent();
        foUserAgent.setProducer(PRODUCER);

        Fop fop = fopFactory.newFop(MIME_PDF, foUserAgent, outStream);
        TransformerFactory factory = TransformerFactory.newInstance();
        Transformer transformer = factory.newTransformer(new StreamSource(templateStream));
        for (Map.Entry<String, String> entry : this.parameters.entrySet()) {
            transformer.setParameter(entry.getKey(), entry.getValue());
        }
        Result res = new SAXResult(fop.getDefaultHandler());
        transformer.transform(xmlSource, res);
    }
}
