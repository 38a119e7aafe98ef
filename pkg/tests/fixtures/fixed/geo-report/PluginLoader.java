package com.acme.report;

import com.acme.geo.Plugin;

public class PluginLoader {

    public String describe(Plugin plugin) {
        return "plugin:" + plugin.name();
    }
}
